"""Dysfluent vs fluent speech classification from MFCC features."""

from dyskit.labels import ClassLabel, DysfluencyType

__version__ = "0.1.0"

__all__ = ["ClassLabel", "DysfluencyType", "__version__"]
