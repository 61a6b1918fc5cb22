from rest_framework import generics
from rest_framework.permissions import AllowAny

from .models import ExperimentRun, TrialResult
from .serializers import ExperimentRunDetailSerializer, ExperimentRunSerializer, TrialResultSerializer


class ExperimentRunListView(generics.ListAPIView):
    """Stored experiments, newest first."""
    permission_classes = [AllowAny]
    serializer_class = ExperimentRunSerializer

    def get_queryset(self):
        queryset = ExperimentRun.objects.all()
        mode = self.request.query_params.get('mode')
        if mode:
            queryset = queryset.filter(mode=mode)
        return queryset


class ExperimentRunDetailView(generics.RetrieveAPIView):
    """One experiment with its outcome table and convergence histogram."""
    permission_classes = [AllowAny]
    serializer_class = ExperimentRunDetailSerializer
    queryset = ExperimentRun.objects.all()


class TrialResultListView(generics.ListAPIView):
    permission_classes = [AllowAny]
    serializer_class = TrialResultSerializer

    def get_queryset(self):
        return TrialResult.objects.filter(run_id=self.kwargs['pk'])
