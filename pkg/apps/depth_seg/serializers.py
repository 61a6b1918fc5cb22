from rest_framework import serializers

from .segmentation import SegParams

_defaults = SegParams()


class SegParamsSerializer(serializers.Serializer):
    k1 = serializers.IntegerField(min_value=1, default=_defaults.k1)
    k2 = serializers.IntegerField(min_value=1, default=_defaults.k2)
    t1 = serializers.FloatField(min_value=0.0, default=_defaults.t1)
    t2 = serializers.FloatField(min_value=0.0, default=_defaults.t2)
    dilate_mask_r = serializers.IntegerField(min_value=0, default=_defaults.dilate_mask_r)
    dilate_close_r = serializers.IntegerField(min_value=0, default=_defaults.dilate_close_r)
    erode_r = serializers.IntegerField(min_value=0, default=_defaults.erode_r)
    min_pixels = serializers.IntegerField(min_value=1, default=_defaults.min_pixels)
    expected_width_m = serializers.FloatField(default=_defaults.expected_width_m)
    expected_height_m = serializers.FloatField(default=_defaults.expected_height_m)
    size_tol = serializers.FloatField(min_value=0.0, max_value=1.0, default=_defaults.size_tol)
    border_fraction = serializers.FloatField(
        min_value=0.0, max_value=1.0, default=_defaults.border_fraction
    )

    def validate(self, data):
        for name in ('t1', 't2'):
            if data[name] <= 0:
                raise serializers.ValidationError({name: "Edge thresholds must be positive."})
        if not 0.0 < data['size_tol'] < 1.0:
            raise serializers.ValidationError({'size_tol': "Must lie strictly between 0 and 1."})
        if data['expected_width_m'] <= 0 or data['expected_height_m'] <= 0:
            raise serializers.ValidationError("Expected object size must be positive.")
        return data

    def create(self, validated_data):
        return SegParams(**validated_data)
