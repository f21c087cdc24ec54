"""Two-class soft-margin SVM trained in the dual by sequential minimal optimization.

The dual being maximized is::

    W(alpha) = sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K(x_i, x_j)
    subject to 0 <= alpha_i <= C and sum_i alpha_i y_i = 0

and the decision value of a trained model is
``sum_i alpha_i y_i K(x_i, x) + b``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from dyskit.errors import DimensionMismatch, EmptyDataset, ModelFormatError, SingleClassDataset
from dyskit.features import AggregationStrategy
from dyskit.labels import ClassLabel
from dyskit.mfcc import FrontendConfig

log = logging.getLogger(__name__)

MAGIC = "DYSKIT-SVM-v1"

# alphas within this fraction of C from a bound are snapped onto it
_SNAP = 1e-12
# pair updates moving alpha_j by less than this (times C) count as no progress
_MIN_STEP = 1e-10


class KernelKind(str, Enum):
    LINEAR = "linear"
    RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.LINEAR
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def resolve(self, dimension: int) -> "KernelSpec":
        """Pin the RBF width; the default is 1/d."""
        if self.kind is KernelKind.RBF and self.gamma is None:
            return replace(self, gamma=1.0 / dimension)
        return self

    def matrix(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(B, dtype=np.float64))
        if A.shape[1] != B.shape[1]:
            raise DimensionMismatch(f"dimension {A.shape[1]} vs {B.shape[1]}")
        if self.kind is KernelKind.LINEAR:
            return A @ B.T
        gamma = self.gamma if self.gamma is not None else 1.0 / A.shape[1]
        sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))

    def describe(self) -> str:
        if self.kind is KernelKind.RBF:
            return f"rbf(gamma={'1/d' if self.gamma is None else f'{self.gamma:g}'})"
        return "linear"


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape} vs {b.shape}")
    if spec.kind is KernelKind.LINEAR:
        return float(a @ b)
    gamma = spec.gamma if spec.gamma is not None else 1.0 / a.size
    return float(np.exp(-gamma * np.sum((a - b) ** 2)))


@dataclass(frozen=True)
class SvmTrainConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_passes: int = 100
    kernel: KernelSpec = field(default_factory=KernelSpec)
    seed: int = 0
    max_sweeps: int = 20000

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1 or self.max_sweeps < 1:
            raise ValueError("max_passes and max_sweeps must be positive")


@dataclass
class SmoResult:
    alpha: np.ndarray
    bias: float
    sweeps: int
    max_violation: float
    converged: bool


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _bias(alpha, g, y, C) -> float:
    """Average over free SVs, else the midpoint of the feasible interval."""
    target = y - g
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(target[free].mean())
    at_zero = alpha <= 0
    lower = (at_zero & (y > 0)) | (~at_zero & (y < 0))
    lo = target[lower].max() if lower.any() else -np.inf
    hi = target[~lower].min() if (~lower).any() else np.inf
    if np.isinf(lo):
        return float(hi)
    if np.isinf(hi):
        return float(lo)
    return float((lo + hi) / 2)


def kkt_violations(K, y, alpha, bias, C) -> np.ndarray:
    """Per-point distance from satisfying the KKT conditions.

    alpha=0 needs y f(x) >= 1, 0<alpha<C needs y f(x) = 1, alpha=C needs
    y f(x) <= 1.
    """
    margin = y * (K @ (alpha * y) + bias) - 1.0
    return np.where(
        alpha <= 0, np.maximum(0.0, -margin),
        np.where(alpha >= C, np.maximum(0.0, margin), np.abs(margin)),
    )


def smo_solve(K, y, C: float = 1.0, tol: float = 1e-3, max_passes: int = 100,
              max_sweeps: int = 20000, seed: int = 0) -> SmoResult:
    """Maximize the dual over a precomputed kernel matrix.

    Each sweep visits every KKT violator ``i`` and pairs it with a random
    ``j``; when that pair cannot move, the remaining ``j`` are tried in
    cyclic order from the random start. A sweep that changes nothing is
    therefore a fixed point and ends training.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    g = np.zeros(n)  # g_i = sum_j alpha_j y_j K_ij
    b = _bias(alpha, g, y, C)

    def snap(a):
        if a < _SNAP * C:
            return 0.0
        if a > C * (1 - _SNAP):
            return C
        return a

    def take_step(i, j):
        if i == j:
            return False
        ai, aj = alpha[i], alpha[j]
        s = y[i] * y[j]
        if s < 0:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if H - L <= _SNAP * C:
            return False
        # b cancels in the error difference
        diff = (g[i] - y[i]) - (g[j] - y[j])
        eta = K[i, i] + K[j, j] - 2 * K[i, j]
        if eta > 1e-12:
            aj_new = min(H, max(L, aj + y[j] * diff / eta))
        else:
            # objective is linear along the constraint line
            slope = y[j] * diff
            aj_new = H if slope > 0 else L if slope < 0 else aj
        aj_new = snap(aj_new)
        if abs(aj_new - aj) <= _MIN_STEP * C:
            return False
        ai_new = snap(ai + s * (aj - aj_new))
        g[:] += (ai_new - ai) * y[i] * K[:, i] + (aj_new - aj) * y[j] * K[:, j]
        alpha[i], alpha[j] = ai_new, aj_new
        return True

    sweeps = 0
    quiet = 0
    while quiet < max_passes and sweeps < max_sweeps:
        changed = 0
        for i in range(n):
            r = y[i] * (g[i] + b - y[i])
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0)):
                continue
            start = int(rng.integers(n - 1))
            start += start >= i
            for offset in range(n):
                j = (start + offset) % n
                if take_step(i, j):
                    changed += 1
                    b = _bias(alpha, g, y, C)
                    break
        sweeps += 1
        if changed:
            quiet = 0
        else:
            # exhaustive pairing found nothing; more sweeps would repeat this one
            quiet = max_passes

    viol = kkt_violations(K, y, alpha, b, C)
    max_viol = float(viol.max()) if n else 0.0
    converged = max_viol <= 10 * tol
    if not converged:
        log.warning("SMO stopped after %d sweeps with KKT violation %.3g", sweeps, max_viol)
    return SmoResult(alpha, b, sweeps, max_viol, converged)


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coeffs: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    kernel: KernelSpec
    positive_label: ClassLabel = ClassLabel.DYSFLUENT
    negative_label: ClassLabel = ClassLabel.FLUENT
    C: float = 1.0
    converged: bool = True
    max_violation: float = 0.0
    sweeps: int = 0
    aggregation: AggregationStrategy = AggregationStrategy.MEAN
    frontend: FrontendConfig = field(default_factory=FrontendConfig)

    @property
    def dimension(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    def decision(self, x):
        """Decision value for one vector, or an array of values for a matrix."""
        X = np.asarray(x, dtype=np.float64)
        if X.shape[-1] != self.dimension:
            raise DimensionMismatch(f"input dimension {X.shape[-1]} vs model dimension {self.dimension}")
        values = self.kernel.matrix(np.atleast_2d(X), self.support_vectors) @ self.dual_coeffs + self.bias
        return float(values[0]) if X.ndim == 1 else values

    def classify(self, x) -> ClassLabel:
        return svm_classify(self, x)


def svm_train(vectors, y, config: SvmTrainConfig | None = None, *,
              positive_label=ClassLabel.DYSFLUENT, negative_label=ClassLabel.FLUENT,
              aggregation=AggregationStrategy.MEAN, frontend: FrontendConfig | None = None) -> SvmModel:
    """Fit on ``vectors`` with targets ``y`` in {-1, +1}.

    Models that stop with KKT violations above ten times the tolerance are
    still returned, with ``converged=False``.
    """
    config = config or SvmTrainConfig()
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.size == 0:
        raise EmptyDataset("SVM needs training data")
    if X.ndim != 2:
        raise DimensionMismatch("training vectors have differing dimensions")
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} vectors but {y.size} targets")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("targets must be -1 or +1")
    if np.unique(y).size < 2:
        raise SingleClassDataset("SVM training data contains a single class")

    kernel = config.kernel.resolve(X.shape[1])
    K = kernel.matrix(X, X)
    res = smo_solve(K, y, config.C, config.tolerance, config.max_passes, config.max_sweeps, config.seed)
    sv = res.alpha > 0
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coeffs=(res.alpha * y)[sv],
        bias=res.bias,
        kernel=kernel,
        positive_label=ClassLabel(positive_label),
        negative_label=ClassLabel(negative_label),
        C=config.C,
        converged=res.converged,
        max_violation=res.max_violation,
        sweeps=res.sweeps,
        aggregation=AggregationStrategy(aggregation),
        frontend=frontend or FrontendConfig(),
    )


def svm_fit(vectors, labels, config: SvmTrainConfig | None = None,
            positive_label=ClassLabel.DYSFLUENT, **kwargs) -> SvmModel:
    """Like :func:`svm_train` but with class labels; ``positive_label`` maps to +1."""
    labels = [ClassLabel(lab) for lab in labels]
    positive_label = ClassLabel(positive_label)
    negative = [c for c in ClassLabel if c is not positive_label][0]
    y = [1.0 if lab is positive_label else -1.0 for lab in labels]
    return svm_train(vectors, y, config, positive_label=positive_label, negative_label=negative, **kwargs)


def svm_decision(model: SvmModel, x) -> float:
    return model.decision(x)


def svm_classify(model: SvmModel, x) -> ClassLabel:
    # a decision value of exactly zero goes to the +1 class
    return model.positive_label if model.decision(x) >= 0 else model.negative_label


def dumps(model: SvmModel) -> str:
    lines = [
        MAGIC,
        f"kernel {model.kernel.kind.value}",
        f"gamma {repr(model.kernel.gamma) if model.kernel.gamma is not None else 'none'}",
        f"C {model.C!r}",
        f"positive {model.positive_label.value}",
        f"negative {model.negative_label.value}",
        f"bias {model.bias!r}",
        f"converged {str(model.converged).lower()}",
        f"max_violation {model.max_violation!r}",
        f"sweeps {model.sweeps}",
        f"aggregation {model.aggregation.value}",
        f"frontend {model.frontend.snapshot()}",
        f"dimension {model.dimension}",
        f"support_vectors {model.n_support}",
    ]
    for coef, sv in zip(model.dual_coeffs, model.support_vectors):
        lines.append(" ".join([repr(float(coef))] + [repr(float(v)) for v in sv]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> SvmModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ModelFormatError(f"not an SVM model file (expected header {MAGIC})")
    header = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("support_vectors"):
        key, _, value = lines[pos].partition(" ")
        header[key] = value.strip()
        pos += 1
    try:
        n_sv = int(lines[pos].split()[1])
        dim = int(header["dimension"])
        rows = np.array([[float(v) for v in line.split()] for line in lines[pos + 1:pos + 1 + n_sv]],
                        dtype=np.float64).reshape(n_sv, dim + 1)
        gamma = None if header["gamma"] == "none" else float(header["gamma"])
        return SvmModel(
            support_vectors=rows[:, 1:],
            dual_coeffs=rows[:, 0],
            bias=float(header["bias"]),
            kernel=KernelSpec(KernelKind(header["kernel"]), gamma),
            positive_label=ClassLabel.parse(header["positive"]),
            negative_label=ClassLabel.parse(header["negative"]),
            C=float(header["C"]),
            converged=header["converged"] == "true",
            max_violation=float(header.get("max_violation", "0")),
            sweeps=int(header.get("sweeps", "0")),
            aggregation=AggregationStrategy(header["aggregation"]),
            frontend=FrontendConfig.from_snapshot(header["frontend"]),
        )
    except (KeyError, IndexError, ValueError) as exc:
        raise ModelFormatError(f"corrupt SVM model: {exc}") from exc
