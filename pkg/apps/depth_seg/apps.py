from django.apps import AppConfig


class DepthSegConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.depth_seg'
    label = 'depth_seg'
