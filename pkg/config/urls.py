from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),

    # Simulated grasping experiments (read-only)
    path('api/experiments/', include('apps.sim_harness.urls')),
]
