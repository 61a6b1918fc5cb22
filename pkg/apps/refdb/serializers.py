from rest_framework import serializers

from .database import RefDbParams

_defaults = RefDbParams()


class RefDbParamsSerializer(serializers.Serializer):
    weight_min = serializers.FloatField(min_value=0.0, allow_null=True, default=None)
    weight_max = serializers.FloatField(allow_null=True, default=None)
    gain_success = serializers.FloatField(default=_defaults.gain_success)
    gain_failure = serializers.FloatField(default=_defaults.gain_failure)
    subset_size = serializers.IntegerField(min_value=1, default=_defaults.subset_size)

    def validate(self, data):
        for name in ('gain_success', 'gain_failure'):
            if not 0.0 < data[name] < 1.0:
                raise serializers.ValidationError({name: "Gains must lie strictly between 0 and 1."})
        low, high = data.get('weight_min'), data.get('weight_max')
        if low is not None and high is not None and low > high:
            raise serializers.ValidationError("weight_min cannot exceed weight_max.")
        if high is not None and high <= 0:
            raise serializers.ValidationError({'weight_max': "Must be positive."})
        return data

    def create(self, validated_data):
        return RefDbParams(**validated_data)
