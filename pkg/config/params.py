"""
Pipeline parameter files.

A parameter file is flat ``key=value`` text (comments with ``#``). One file
holds every section; each app's serializer picks the keys it knows and
ignores the rest.
"""
import logging
from pathlib import Path

from django.conf import settings
from dotenv import dotenv_values

logger = logging.getLogger(__name__)


def read_params_file(path=None):
    """
    Read a parameter file into a dict of non-empty string values.

    Args:
        path: file to read; defaults to settings.GRASP_CONFIG_FILE

    Raises:
        FileNotFoundError: if the file does not exist
    """
    path = Path(path or settings.GRASP_CONFIG_FILE)
    if not path.is_file():
        raise FileNotFoundError(f"Parameter file not found: {path}")
    values = {key: value for key, value in dotenv_values(path).items() if value not in (None, '')}
    logger.debug(f"Loaded {len(values)} parameter(s) from {path}")
    return values


def build_params(serializer_class, values=None):
    """
    Validate ``values`` with a parameter serializer and return its dataclass.

    Raises:
        rest_framework.exceptions.ValidationError: on invalid values
    """
    serializer = serializer_class(data=dict(values or {}))
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def load_params(serializer_class, path=None):
    return build_params(serializer_class, read_params_file(path))
