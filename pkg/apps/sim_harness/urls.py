from django.urls import path
from . import views

urlpatterns = [
    # Stored experiments (read-only)
    path('', views.ExperimentRunListView.as_view(), name='experiment-list'),
    path('<int:pk>/', views.ExperimentRunDetailView.as_view(), name='experiment-detail'),
    path('<int:pk>/trials/', views.TrialResultListView.as_view(), name='experiment-trials'),
]
