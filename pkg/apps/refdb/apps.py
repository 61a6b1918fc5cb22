from django.apps import AppConfig


class RefdbConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.refdb'
    label = 'refdb'
