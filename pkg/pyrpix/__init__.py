from .core import PyrpixError, ConfigError, DataError, NumericError, TensorError, ShapeError, CacheDesyncError, \
    CheckpointError
from .config import RunConfig, SampleConfig, TrainConfig
from .models import build_model, AuxModelPair, FlatModel, PyramidModel

__all__ = ['PyrpixError', 'ConfigError', 'DataError', 'NumericError', 'TensorError', 'ShapeError',
           'CacheDesyncError', 'CheckpointError',
           'RunConfig', 'SampleConfig', 'TrainConfig',
           'build_model', 'AuxModelPair', 'FlatModel', 'PyramidModel']
