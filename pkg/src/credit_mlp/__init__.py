"""Credit-rating modeling toolkit built around a small numpy MLP."""

from credit_mlp.errors import ConfigError, CreditMLPError, DataError, NumericError
from credit_mlp.rating_scale import ClassIndexMap, RatingScale, build_class_map, parse_grade

__version__ = "0.1.0"

__all__ = [
    "ClassIndexMap",
    "ConfigError",
    "CreditMLPError",
    "DataError",
    "NumericError",
    "RatingScale",
    "build_class_map",
    "parse_grade",
]
