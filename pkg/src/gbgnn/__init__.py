"""Granular-ball guided semantic-consistency mining and GNN training."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    EngineError,
    GbgnnError,
    IngestError,
    IoError,
    ModelError,
    OracleError,
    SchemaError,
    SpecError,
    TrainError,
)

__all__ = [
    "__version__",
    "GbgnnError",
    "ConfigError",
    "IngestError",
    "SchemaError",
    "DataError",
    "SpecError",
    "IoError",
    "EngineError",
    "OracleError",
    "ModelError",
    "TrainError",
]
