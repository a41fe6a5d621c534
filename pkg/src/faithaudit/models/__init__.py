"""Self-explainable GNNs: analytic constructions and the trainable model."""

from faithaudit.models.analytic import (
    ANALYTIC,
    BrokenColorGV,
    DegenerateColorGV,
    DegenerateMotif,
    FaithfulColorGV,
    GSATScored,
    analytic_model,
    permuted_degenerate,
)
from faithaudit.models.base import SEGNN, ModelError, Prediction

__all__ = [
    "ANALYTIC",
    "SEGNN",
    "BrokenColorGV",
    "DegenerateColorGV",
    "DegenerateMotif",
    "FaithfulColorGV",
    "GSATScored",
    "ModelError",
    "Prediction",
    "analytic_model",
    "permuted_degenerate",
]
