from django.conf import settings
from rest_framework import serializers

from apps.depth_seg.serializers import SegParamsSerializer
from apps.gripper_track.serializers import GripperGeometrySerializer, TrackerParamsSerializer
from apps.matching.serializers import MatchingParamsSerializer
from apps.posfilter.serializers import FilterParamsSerializer
from apps.refdb.serializers import RefDbParamsSerializer
from config.params import build_params, read_params_file

from .experiment import convergence_histogram, outcome_table, results_frame
from .models import ExperimentRun, TrialResult
from .pipeline import SIMULATOR_SEGMENTATION, PipelineConfig, TrialParams
from .scene import SceneConfig

_scene = SceneConfig()
_trial = TrialParams()
SIMULATOR_OVERRIDES = {
    't2': SIMULATOR_SEGMENTATION.t2,
    'dilate_close_r': SIMULATOR_SEGMENTATION.dilate_close_r,
}


class ColorValueField(serializers.Field):
    """``r,g,b`` text (as found in parameter files) or a three-item list."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(',')]
        try:
            values = tuple(int(v) for v in data)
        except (TypeError, ValueError):
            raise serializers.ValidationError("Expected three integers, e.g. 200,190,170.")
        if len(values) != 3 or any(not 0 <= v <= 255 for v in values):
            raise serializers.ValidationError("Expected three integers in [0, 255].")
        return values

    def to_representation(self, value):
        return list(value)


class SceneConfigSerializer(serializers.Serializer):
    table_height = serializers.FloatField(default=_scene.table_height)
    table_x_min = serializers.FloatField(default=_scene.table_x_min)
    table_x_max = serializers.FloatField(default=_scene.table_x_max)
    table_y_min = serializers.FloatField(default=_scene.table_y_min)
    table_y_max = serializers.FloatField(default=_scene.table_y_max)
    max_range = serializers.FloatField(min_value=0.1, default=_scene.max_range)
    placement_x = serializers.FloatField(default=_scene.placement_x)
    placement_y = serializers.FloatField(default=_scene.placement_y)
    placement_radius = serializers.FloatField(min_value=0.0, default=_scene.placement_radius)
    object_diameter = serializers.FloatField(min_value=0.001, default=_scene.object_diameter)
    object_height = serializers.FloatField(min_value=0.001, default=_scene.object_height)
    keypoint_density = serializers.FloatField(min_value=1.0, default=_scene.keypoint_density)
    descriptor_noise = serializers.FloatField(min_value=0.0, default=_scene.descriptor_noise)
    descriptor_length = serializers.IntegerField(min_value=1, default=_scene.descriptor_length)
    depth_noise_correlated_mm = serializers.FloatField(min_value=0.0, default=_scene.depth_noise_correlated_mm)
    depth_noise_white_mm = serializers.FloatField(min_value=0.0, default=_scene.depth_noise_white_mm)
    depth_noise_blur_px = serializers.FloatField(min_value=0.1, default=_scene.depth_noise_blur_px)
    image_width = serializers.IntegerField(min_value=16, default=_scene.image_width)
    image_height = serializers.IntegerField(min_value=16, default=_scene.image_height)
    fx = serializers.FloatField(default=_scene.fx)
    fy = serializers.FloatField(default=_scene.fy)
    cx = serializers.FloatField(default=_scene.cx)
    cy = serializers.FloatField(default=_scene.cy)
    mount_x = serializers.FloatField(default=_scene.mount_x)
    mount_y = serializers.FloatField(default=_scene.mount_y)
    mount_z = serializers.FloatField(default=_scene.mount_z)
    aim_x = serializers.FloatField(default=_scene.aim_x)
    aim_y = serializers.FloatField(default=_scene.aim_y)
    aim_z = serializers.FloatField(default=_scene.aim_z)
    table_color = ColorValueField(default=_scene.table_color)
    floor_color = ColorValueField(default=_scene.floor_color)
    object_color = ColorValueField(default=_scene.object_color)
    dot_color = ColorValueField(default=_scene.dot_color)
    finger_color = ColorValueField(default=_scene.finger_color)

    def validate(self, data):
        if data['table_x_min'] >= data['table_x_max'] or data['table_y_min'] >= data['table_y_max']:
            raise serializers.ValidationError("Table extent is empty.")
        if data['fx'] <= 0 or data['fy'] <= 0:
            raise serializers.ValidationError("Focal lengths must be positive.")
        if not (0 <= data['cx'] < data['image_width'] and 0 <= data['cy'] < data['image_height']):
            raise serializers.ValidationError("Principal point must lie inside the image.")
        return data

    def create(self, validated_data):
        return SceneConfig(**validated_data)


class TrialParamsSerializer(serializers.Serializer):
    frame_rate_hz = serializers.FloatField(min_value=0.1, default=_trial.frame_rate_hz)
    detection_timeout_s = serializers.FloatField(min_value=0.1, default=_trial.detection_timeout_s)
    tracking_timeout_s = serializers.FloatField(min_value=0.1, default=_trial.tracking_timeout_s)
    arm_offset_max = serializers.FloatField(min_value=0.0, default=_trial.arm_offset_max)
    arm_jitter = serializers.FloatField(min_value=0.0, default=_trial.arm_jitter)
    home_x = serializers.FloatField(default=_trial.home_x)
    home_y = serializers.FloatField(default=_trial.home_y)
    home_z = serializers.FloatField(default=_trial.home_z)
    standoff = serializers.FloatField(min_value=0.0, default=_trial.standoff)
    arm_step = serializers.FloatField(min_value=0.001, default=_trial.arm_step)
    reach_tolerance = serializers.FloatField(min_value=0.0001, default=_trial.reach_tolerance)
    contact_tolerance = serializers.FloatField(min_value=0.0, default=_trial.contact_tolerance)
    friction_margin = serializers.FloatField(min_value=0.0, default=_trial.friction_margin)

    def create(self, validated_data):
        return TrialParams(**validated_data)


def build_pipeline_config(values=None) -> PipelineConfig:
    """
    Validate every section of a flat parameter mapping.

    Raises:
        rest_framework.exceptions.ValidationError: on invalid values
    """
    values = dict(values or {})
    return PipelineConfig(
        scene=build_params(SceneConfigSerializer, values),
        segmentation=build_params(SegParamsSerializer, {**SIMULATOR_OVERRIDES, **values}),
        matching=build_params(MatchingParamsSerializer, values),
        refdb=build_params(RefDbParamsSerializer, values),
        filter=build_params(FilterParamsSerializer, values),
        tracker=build_params(TrackerParamsSerializer, values),
        geometry=build_params(GripperGeometrySerializer, values),
        trial=build_params(TrialParamsSerializer, values),
    )


def load_pipeline_config(path=None) -> PipelineConfig:
    """
    Read a parameter file (settings.GRASP_CONFIG_FILE by default) into a
    PipelineConfig. Frame rate and timeouts the file leaves out come from
    SIM_FRAME_RATE_HZ and SIM_TIMEOUT_S.
    """
    values = read_params_file(path)
    values.setdefault('frame_rate_hz', settings.SIM_FRAME_RATE_HZ)
    values.setdefault('detection_timeout_s', settings.SIM_TIMEOUT_S)
    values.setdefault('tracking_timeout_s', settings.SIM_TIMEOUT_S)
    return build_pipeline_config(values)


# API serializers

class TrialResultSerializer(serializers.ModelSerializer):
    outcome_display = serializers.CharField(source='get_outcome_display', read_only=True)
    success = serializers.BooleanField(read_only=True)

    class Meta:
        model = TrialResult
        fields = [
            'id', 'seed', 'outcome', 'outcome_display', 'success', 'convergence_time_s',
            'matcher_invocations', 'frames', 'tracking_frames',
            'mean_invocations_prob', 'mean_invocations_all', 'final_error_m',
        ]
        read_only_fields = fields


class ExperimentRunSerializer(serializers.ModelSerializer):
    mode_display = serializers.CharField(source='get_mode_display', read_only=True)
    success_frequency = serializers.FloatField(read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'mode', 'mode_display', 'model_error_mm', 'trials', 'seed', 'database_path',
            'success_count', 'failure_count', 'success_frequency', 'converged_within_2s',
            'started_at', 'finished_at',
        ]
        read_only_fields = fields


class ExperimentRunDetailSerializer(ExperimentRunSerializer):
    outcome_table = serializers.SerializerMethodField()
    convergence_histogram = serializers.SerializerMethodField()

    class Meta(ExperimentRunSerializer.Meta):
        fields = ExperimentRunSerializer.Meta.fields + ['outcome_table', 'convergence_histogram']
        read_only_fields = fields

    def get_outcome_table(self, obj):
        table = outcome_table(results_frame(obj))
        return table.reset_index().to_dict(orient='records')

    def get_convergence_histogram(self, obj):
        histogram = convergence_histogram(results_frame(obj)['convergence_time_s'])
        return histogram.to_dict(orient='records')
