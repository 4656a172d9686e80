"""Friction-model learning toolkit.

Simulates planar contact systems under LuGre friction, trains
physics-informed neural friction estimators from noisy state data, and
identifies LuGre parameters with classical optimizers.
"""

__version__ = "0.1.0"
