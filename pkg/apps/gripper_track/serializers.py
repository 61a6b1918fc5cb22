from rest_framework import serializers

from .kalman import TrackerParams
from .spaces import GripperGeometry

_tracker = TrackerParams()
_geometry = GripperGeometry()


class TrackerParamsSerializer(serializers.Serializer):
    process_noise = serializers.FloatField(min_value=0.0, default=_tracker.process_noise)
    measurement_sigma = serializers.FloatField(default=_tracker.measurement_sigma)
    inflation = serializers.FloatField(default=_tracker.inflation)
    trace_threshold = serializers.FloatField(default=_tracker.trace_threshold)
    black_threshold = serializers.IntegerField(min_value=1, max_value=256, default=_tracker.black_threshold)
    min_finger_pixels = serializers.IntegerField(min_value=1, default=_tracker.min_finger_pixels)
    finger_distance_tol = serializers.FloatField(min_value=0.0, default=_tracker.finger_distance_tol)
    gain = serializers.FloatField(default=_tracker.gain)
    initial_sigma = serializers.FloatField(default=_tracker.initial_sigma)

    def validate(self, data):
        if data['inflation'] <= 1.0:
            raise serializers.ValidationError({'inflation': "Must be greater than 1."})
        for name in ('measurement_sigma', 'initial_sigma', 'trace_threshold'):
            if data[name] <= 0:
                raise serializers.ValidationError({name: "Must be positive."})
        return data

    def create(self, validated_data):
        return TrackerParams(**validated_data)


class GripperGeometrySerializer(serializers.Serializer):
    gripper_width = serializers.FloatField(default=_geometry.gripper_width)
    finger_width = serializers.FloatField(default=_geometry.finger_width)
    finger_thickness = serializers.FloatField(default=_geometry.finger_thickness)
    finger_length = serializers.FloatField(default=_geometry.finger_length)
    arm_error_margin = serializers.FloatField(min_value=0.0, default=_geometry.arm_error_margin)

    def validate(self, data):
        for name in ('gripper_width', 'finger_width', 'finger_thickness', 'finger_length'):
            if data[name] <= 0:
                raise serializers.ValidationError({name: "Must be positive."})
        if data['finger_width'] >= data['gripper_width']:
            raise serializers.ValidationError("Fingers cannot be wider than the gripper opening.")
        return data

    def create(self, validated_data):
        return GripperGeometry(**validated_data)
