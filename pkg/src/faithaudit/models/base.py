"""Self-explainable GNN pipeline: extractor -> selection -> classifier."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from faithaudit.graph import Explanation, Graph, RelevanceScores, Selection, Threshold, select_explanation


class ModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class Prediction:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if abs(sum(self.probs) - 1.0) > 1e-9 or min(self.probs) < 0.0:
            raise ModelError(f"not a probability vector: {self.probs}")

    @classmethod
    def of(cls, probs: Sequence[float]) -> "Prediction":
        return cls(tuple(float(p) for p in probs))

    @classmethod
    def hard(cls, label: int, n_classes: int = 2) -> "Prediction":
        return cls(tuple(1.0 if i == label else 0.0 for i in range(n_classes)))

    @classmethod
    def uniform(cls, n_classes: int = 2) -> "Prediction":
        return cls((1.0 / n_classes,) * n_classes)

    @property
    def label(self) -> int:
        # first maximum, so ties go to the lower index
        return int(np.argmax(self.probs))

    def __len__(self) -> int:
        return len(self.probs)


class SEGNN:
    """Base class. Subclasses provide ``extract`` and ``classify``.

    ``predict(g)`` is always ``classify`` applied to the explanation selected
    from ``extract(g)``; no state is carried between calls.
    """

    name = "segnn"
    n_classes = 2
    selection: Selection = Threshold(0.5)
    rescue = False
    # False when predictions provably ignore edges; enables the oracle shortcut
    uses_edges = True

    def extract(self, g: Graph) -> RelevanceScores:
        raise NotImplementedError

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        raise NotImplementedError

    def explain(self, g: Graph) -> Explanation:
        return select_explanation(self.extract(g), self.selection, g, self.rescue)

    def forward(self, g: Graph) -> tuple[RelevanceScores, Explanation, Prediction]:
        expl = self.explain(g)
        return expl.scores, expl, self.classify(g, expl.scores, expl)

    def predict(self, g: Graph) -> Prediction:
        return self.forward(g)[2]

    def describe(self) -> dict:
        return {"name": self.name}
