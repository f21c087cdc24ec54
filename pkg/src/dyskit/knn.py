"""k-nearest-neighbour classifier with plain majority voting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dyskit.errors import DimensionMismatch, EmptyDataset, KTooLarge, ModelFormatError, SingleClassDataset
from dyskit.features import AggregationStrategy, distances_to
from dyskit.labels import ClassLabel
from dyskit.mfcc import FrontendConfig

MAGIC = "DYSKIT-KNN-v1"
DEFAULT_K = 3


@dataclass(frozen=True, eq=False)
class KnnModel:
    points: np.ndarray
    labels: tuple[ClassLabel, ...]
    k: int = DEFAULT_K
    aggregation: AggregationStrategy = AggregationStrategy.MEAN
    frontend: FrontendConfig = field(default_factory=FrontendConfig)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def classify(self, query, k: int | None = None) -> ClassLabel:
        return knn_classify(self, query, self.k if k is None else k)[0]


def knn_train(vectors, labels, k: int = DEFAULT_K, aggregation=AggregationStrategy.MEAN,
              frontend: FrontendConfig | None = None) -> KnnModel:
    """Store the training set; nothing is computed until classification."""
    labels = tuple(ClassLabel(label) for label in labels)
    if len(labels) == 0:
        raise EmptyDataset("k-NN needs at least one training point")
    try:
        points = np.array([np.asarray(v, dtype=np.float64) for v in vectors])
    except ValueError:
        raise DimensionMismatch("training vectors have differing dimensions") from None
    if points.ndim != 2:
        raise DimensionMismatch("training vectors have differing dimensions")
    if points.shape[0] != len(labels):
        raise ValueError(f"{points.shape[0]} vectors but {len(labels)} labels")
    if len(set(labels)) < 2:
        raise SingleClassDataset(f"training data only contains {labels[0]}")
    if k < 1:
        raise ValueError("k must be positive")
    points.setflags(write=False)
    return KnnModel(points, labels, k, AggregationStrategy(aggregation), frontend or FrontendConfig())


def knn_neighbors(model: KnnModel, query, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the ``k`` nearest points; exact ties keep training order."""
    if k < 1:
        raise ValueError("k must be positive")
    if k > len(model):
        raise KTooLarge(f"k={k} exceeds the {len(model)} stored points")
    d = distances_to(model.points, query)
    order = np.argsort(d, kind="stable")[:k]
    return order, d[order]


def knn_classify(model: KnnModel, query, k: int = DEFAULT_K) -> tuple[ClassLabel, dict[ClassLabel, int]]:
    """Majority label among the ``k`` nearest points, plus the vote counts.

    Tied vote counts go to the class whose voters are closer in total, then to
    the earlier label in ``ClassLabel`` order.
    """
    idx, dist = knn_neighbors(model, query, k)
    votes = {label: 0 for label in ClassLabel}
    summed = {label: 0.0 for label in ClassLabel}
    for i, d in zip(idx, dist):
        votes[model.labels[i]] += 1
        summed[model.labels[i]] += float(d)
    winner = min(ClassLabel, key=lambda c: (-votes[c], summed[c], c.order))
    return winner, votes


def dumps(model: KnnModel) -> str:
    lines = [
        MAGIC,
        f"dimension {model.dimension}",
        f"k {model.k}",
        f"aggregation {model.aggregation.value}",
        f"frontend {model.frontend.snapshot()}",
        f"points {len(model)}",
    ]
    for label, vec in zip(model.labels, model.points):
        lines.append(" ".join([label.value] + [repr(float(v)) for v in vec]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> KnnModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ModelFormatError(f"not a k-NN model file (expected header {MAGIC})")
    header = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("points"):
        key, _, value = lines[pos].partition(" ")
        header[key] = value.strip()
        pos += 1
    try:
        n_points = int(lines[pos].split()[1])
        dim = int(header["dimension"])
        rows = [line.split() for line in lines[pos + 1:pos + 1 + n_points]]
        labels = [ClassLabel.parse(r[0]) for r in rows]
        vectors = [[float(v) for v in r[1:]] for r in rows]
        model = knn_train(
            vectors, labels, k=int(header["k"]),
            aggregation=AggregationStrategy(header["aggregation"]),
            frontend=FrontendConfig.from_snapshot(header["frontend"]),
        )
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, (SingleClassDataset, DimensionMismatch)):
            raise
        raise ModelFormatError(f"corrupt k-NN model: {exc}") from exc
    if len(model) != n_points or model.dimension != dim:
        raise ModelFormatError("k-NN model point count or dimension disagrees with its header")
    return model
