from rest_framework import serializers

from .matcher import MatchingParams

_defaults = MatchingParams()


class MatchingParamsSerializer(serializers.Serializer):
    ratio = serializers.FloatField(min_value=0.0, max_value=1.0, default=_defaults.ratio)
    ransac_iters = serializers.IntegerField(min_value=1, default=_defaults.ransac_iters)
    inlier_px = serializers.FloatField(min_value=0.0, default=_defaults.inlier_px)
    match_min = serializers.IntegerField(min_value=1, default=_defaults.match_min)
    descriptor_length = serializers.IntegerField(min_value=1, default=_defaults.descriptor_length)

    def create(self, validated_data):
        return MatchingParams(**validated_data)
