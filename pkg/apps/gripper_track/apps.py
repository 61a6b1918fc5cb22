from django.apps import AppConfig


class GripperTrackConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.gripper_track'
    label = 'gripper_track'
