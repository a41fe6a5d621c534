"""Faithfulness metrics and the perturbation families behind them."""

from faithaudit.metrics.core import (
    METRICS,
    NECESSITY,
    SUFFICIENCY,
    MetricContext,
    MetricError,
    MetricResult,
    RejectionEntry,
    audit,
    distance,
    evaluate_metric,
    is_prediction_changed,
    rejection_ratio,
    report_csv,
    suffcause,
)

__all__ = [
    "METRICS",
    "NECESSITY",
    "SUFFICIENCY",
    "MetricContext",
    "MetricError",
    "MetricResult",
    "RejectionEntry",
    "audit",
    "distance",
    "evaluate_metric",
    "is_prediction_changed",
    "rejection_ratio",
    "report_csv",
    "suffcause",
]
