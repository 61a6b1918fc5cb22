from django.apps import AppConfig


class SimHarnessConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.sim_harness'
    label = 'sim_harness'
