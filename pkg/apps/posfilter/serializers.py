from rest_framework import serializers

from .filter import CONVERGENCE_RULES, REMOVAL_MODES, FilterParams

_defaults = FilterParams()


class FilterParamsSerializer(serializers.Serializer):
    window = serializers.IntegerField(min_value=1, default=_defaults.window)
    outlier_count = serializers.IntegerField(min_value=0, default=_defaults.outlier_count)
    alpha = serializers.FloatField(default=_defaults.alpha)
    dispersion_max = serializers.FloatField(min_value=0.0, default=_defaults.dispersion_max)
    quality_threshold = serializers.FloatField(default=_defaults.quality_threshold)
    convergence_rule = serializers.ChoiceField(choices=CONVERGENCE_RULES, default=_defaults.convergence_rule)
    removal_mode = serializers.ChoiceField(choices=REMOVAL_MODES, default=_defaults.removal_mode)

    def validate(self, data):
        if data['outlier_count'] >= data['window']:
            raise serializers.ValidationError("outlier_count must be smaller than window.")
        if data['alpha'] <= 0:
            raise serializers.ValidationError({'alpha': "Must be positive."})
        return data

    def create(self, validated_data):
        return FilterParams(**validated_data)
