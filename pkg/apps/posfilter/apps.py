from django.apps import AppConfig


class PosfilterConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.posfilter'
    label = 'posfilter'
