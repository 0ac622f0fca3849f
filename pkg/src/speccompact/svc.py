"""Soft-margin support-vector classification trained by SMO.

The dual problem solved here is::

    min_a  1/2 a' Q a - sum(a)
    s.t.   0 <= a_k <= c,   sum(a_k y_k) = 0,     Q_kl = y_k y_l K(x_k, x_l)

The first index of each working pair is the maximal KKT violator.  The
second is chosen either by the second-order gain rule of Fan, Chen and Lin
(``selection="second"``, the default) or as the point with the largest error
gap to the first (``selection="first"``, the classic maximal violating pair).
``argmax``/``argmin`` break ties toward the lowest index, so training is fully
deterministic either way.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import DegenerateLabels, DimensionMismatch, NonConvergence

__all__ = [
    "KernelSpec",
    "Hyperparams",
    "SolverState",
    "SvcModel",
    "kernel_eval",
    "kernel_matrix",
    "smo_solve",
    "dual_objective",
    "train_svc",
    "decision_value",
    "decision_values",
    "predict",
    "predict_many",
    "model_error",
    "lipschitz_bound",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
]

LINEAR = "linear"
RBF = "rbf"
_TAU = 1e-12
_CHUNK = 2048


@dataclass(frozen=True)
class KernelSpec:
    kind: str = RBF
    gamma: Optional[float] = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in (LINEAR, RBF):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == RBF:
            if self.gamma is None or not (self.gamma > 0 and math.isfinite(self.gamma)):
                raise ValueError("rbf kernel requires gamma > 0")
        else:
            object.__setattr__(self, "gamma", None)

    @classmethod
    def linear(cls):
        return cls(LINEAR)

    @classmethod
    def rbf(cls, gamma: float):
        return cls(RBF, float(gamma))


@dataclass(frozen=True)
class Hyperparams:
    """Training settings.

    ``kernel=None`` means RBF with ``gamma = 1 / n_features``, resolved when
    training starts.  ``epsilon`` is only a reporting threshold on the model
    error ``y - f(x)``; it does not enter the loss.  SMO stops after
    ``max_passes * n_train`` pair updates if the KKT gap is still above
    ``kkt_tol``.
    """

    kernel: Optional[KernelSpec] = None
    c: float = 10.0
    epsilon: float = 0.1
    kkt_tol: float = 1e-3
    max_passes: int = 200
    selection: str = "second"

    def __post_init__(self):
        if self.selection not in ("first", "second"):
            raise ValueError("selection must be 'first' or 'second'")
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if int(self.max_passes) < 1:
            raise ValueError("max_passes must be a positive integer")

    def resolve_kernel(self, n_features: int) -> KernelSpec:
        if self.kernel is not None:
            return self.kernel
        return KernelSpec.rbf(1.0 / max(n_features, 1))

    def to_json(self) -> dict:
        k = self.kernel
        return {
            "kernel": None if k is None else k.kind,
            "gamma": None if k is None else k.gamma,
            "c": self.c,
            "epsilon": self.epsilon,
            "kkt_tol": self.kkt_tol,
            "max_passes": self.max_passes,
            "selection": self.selection,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Hyperparams":
        kind = obj.get("kernel")
        kernel = None if kind is None else KernelSpec(kind, obj.get("gamma"))
        return cls(
            kernel=kernel,
            c=float(obj.get("c", 10.0)),
            epsilon=float(obj.get("epsilon", 0.1)),
            kkt_tol=float(obj.get("kkt_tol", 1e-3)),
            max_passes=int(obj.get("max_passes", 200)),
            selection=str(obj.get("selection", "second")),
        )


@dataclass(frozen=True, eq=False)
class SolverState:
    """Final SMO state: dual variables, bias, hinge slacks and dual objective."""

    alphas: np.ndarray
    bias: float
    slacks: np.ndarray
    objective: float
    n_iter: int
    converged: bool
    kkt_gap: float


@dataclass(frozen=True, eq=False)
class SvcModel:
    support_vectors: np.ndarray
    coefficients: np.ndarray
    bias: float
    kernel: KernelSpec
    training_meta: dict = field(default_factory=dict)
    state: Optional[SolverState] = field(default=None, repr=False)

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=float, copy=True)
        coef = np.array(self.coefficients, dtype=float, copy=True).ravel()
        if sv.ndim != 2 or sv.shape[0] != coef.shape[0]:
            raise ValueError("support_vectors and coefficients must have equal length")
        if coef.shape[0] == 0:
            raise ValueError("a model needs at least one support vector")
        sv.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SvcModel):
            return NotImplemented
        return (
            self.kernel == other.kernel
            and self.bias == other.bias
            and np.array_equal(self.support_vectors, other.support_vectors)
            and np.array_equal(self.coefficients, other.coefficients)
        )


def kernel_eval(k: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise DimensionMismatch(f"vectors of dimension {x.size} and {z.size}")
    if k.kind == LINEAR:
        return float(np.dot(x, z))
    d = x - z
    return float(np.exp(-k.gamma * np.dot(d, d)))


def kernel_matrix(k: KernelSpec, X, Z) -> np.ndarray:
    """Gram matrix ``K[a, b] = K(X[a], Z[b])``.

    Squared distances are accumulated one coordinate at a time so that
    ``K(x, x)`` is exactly 1 for the RBF kernel and the matrix of a set with
    itself is exactly symmetric.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatch(f"feature dimensions {X.shape[1]} and {Z.shape[1]}")
    if k.kind == LINEAR:
        return X @ Z.T
    sq = np.zeros((X.shape[0], Z.shape[0]))
    for d in range(X.shape[1]):
        diff = X[:, d, None] - Z[None, :, d]
        sq += diff * diff
    sq *= -k.gamma
    return np.exp(sq, out=sq)


def dual_objective(K, y, alphas) -> float:
    """``1/2 a'Qa - sum(a)`` for the given Gram matrix and labels."""
    ay = np.asarray(alphas, dtype=float) * np.asarray(y, dtype=float)
    return float(0.5 * ay @ (np.asarray(K) @ ay) - np.sum(alphas))


def _bias_from_gradient(F, y, alphas, c):
    # F = y - u is the negated error without bias; free SVs satisfy f = y
    # exactly, so b = F there.  Without free SVs, take the middle of the
    # feasible interval.
    at_lo = alphas <= 0.0
    at_hi = alphas >= c
    free = ~(at_lo | at_hi)
    if np.any(free):
        return float(np.mean(F[free]))
    # y f >= 1 at a = 0 and y f <= 1 at a = c bound b from below or above
    below = (at_lo & (y > 0)) | (at_hi & (y < 0))
    above = (at_lo & (y < 0)) | (at_hi & (y > 0))
    lb = float(np.max(F[below])) if np.any(below) else -math.inf
    ub = float(np.min(F[above])) if np.any(above) else math.inf
    if math.isinf(ub) and math.isinf(lb):
        return 0.0
    if math.isinf(ub):
        return lb
    if math.isinf(lb):
        return ub
    return 0.5 * (ub + lb)


def smo_solve(K, y, c: float, tol: float = 1e-3, max_iter: int = 100_000, selection: str = "second") -> SolverState:
    """Solve the soft-margin dual for a precomputed Gram matrix ``K``.

    Parameters
    ----------
    K : ndarray, shape (n, n)
        Symmetric positive semi-definite kernel matrix.
    y : ndarray of {+1, -1}, shape (n,)
    c : float
        Box constraint.
    tol : float
        Stop once the maximal KKT violation ``max_up F - min_low F`` is
        at most ``tol``.
    max_iter : int
        Cap on pair updates.
    selection : {"second", "first"}
        Rule for the second index of the working pair.

    Returns
    -------
    SolverState
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    alphas = np.zeros(n)
    # F = -y * grad = y - sum_l a_l y_l K[:, l]
    F = y.copy()
    diag = np.diag(K).copy()
    pos = y > 0
    neg = ~pos
    up = pos.copy()  # a < c for y=+1 or a > 0 for y=-1
    low = neg.copy()  # a > 0 for y=+1 or a < c for y=-1
    neg_inf = np.full(n, -np.inf)
    pos_inf = np.full(n, np.inf)

    second_order = selection == "second"
    converged = False
    gap = math.inf
    it = 0
    while it < max_iter:
        i = int(np.argmax(np.where(up, F, neg_inf)))
        j = int(np.argmin(np.where(low, F, pos_inf)))
        gap = float(F[i] - F[j])
        if not up[i] or not low[j] or gap <= tol:
            converged = True
            break
        if second_order:
            b = F[i] - F
            curv = diag[i] + diag - 2.0 * K[i]
            curv = np.maximum(curv, _TAU)
            gain = np.where(low & (b > 0), b * b / curv, -1.0)
            j = int(np.argmax(gain))
        it += 1

        yi, yj = y[i], y[j]
        Kij = K[i, j]
        ai_old, aj_old = alphas[i], alphas[j]
        Gi, Gj = -yi * F[i], -yj * F[j]
        # curvature of the dual along the pair direction, either label case
        quad = max(diag[i] + diag[j] - 2.0 * Kij, _TAU)
        if yi != yj:
            delta = (-Gi - Gj) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            delta = (Gi - Gj) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        alphas[i], alphas[j] = ai, aj

        dai, daj = ai - ai_old, aj - aj_old
        if dai != 0.0:
            F -= (yi * dai) * K[i]
        if daj != 0.0:
            F -= (yj * daj) * K[j]
        for k, a in ((i, ai), (j, aj)):
            if pos[k]:
                up[k] = a < c
                low[k] = a > 0
            else:
                up[k] = a > 0
                low[k] = a < c

    # recompute from scratch to shed accumulated rounding in F
    ay = alphas * y
    F = y - K @ ay
    bias = _bias_from_gradient(F, y, alphas, c)
    f_train = y - F + bias
    slacks = np.maximum(0.0, 1.0 - y * f_train)
    objective = float(0.5 * ay @ (y - F) - alphas.sum())
    return SolverState(
        alphas=alphas,
        bias=bias,
        slacks=slacks,
        objective=objective,
        n_iter=it,
        converged=converged,
        kkt_gap=gap,
    )


def _as_features(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch("features must be a 2-D array of vectors")
    return X


def train_svc(features, labels, hp: Hyperparams = Hyperparams(), seed: int = 0) -> SvcModel:
    """Train a classifier on ``features`` with labels in {+1, -1}.

    Training is deterministic for a given input order; ``seed`` is recorded
    in ``training_meta`` so callers can trace which derived seed produced a
    model.

    Raises
    ------
    DegenerateLabels
        If only one class is present.
    DimensionMismatch
        If feature rows differ in length or labels do not match.
    """
    try:
        X = _as_features(features)
    except ValueError:
        raise DimensionMismatch("feature vectors differ in dimension") from None
    y = np.asarray(labels, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} feature vectors but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if X.shape[0] < 2 or np.all(y == y[0]):
        raise DegenerateLabels("training labels contain a single class")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")

    kernel = hp.resolve_kernel(X.shape[1])
    K = kernel_matrix(kernel, X, X)
    max_iter = int(hp.max_passes) * X.shape[0]
    state = smo_solve(K, y, hp.c, hp.kkt_tol, max_iter, hp.selection)
    del K
    if not state.converged:
        warnings.warn(
            f"SMO hit {max_iter} iterations with KKT gap {state.kkt_gap:.3g} > {hp.kkt_tol}",
            NonConvergence,
            stacklevel=2,
        )
    sv = state.alphas > 0
    meta = {
        "c": hp.c,
        "epsilon": hp.epsilon,
        "kkt_tol": hp.kkt_tol,
        "max_passes": int(hp.max_passes),
        "n_train": int(X.shape[0]),
        "n_features": int(X.shape[1]),
        "n_support": int(sv.sum()),
        "n_iter": state.n_iter,
        "converged": state.converged,
        "objective": state.objective,
        "seed": int(seed),
    }
    return SvcModel(
        support_vectors=X[sv],
        coefficients=(state.alphas * y)[sv],
        bias=state.bias,
        kernel=kernel,
        training_meta=meta,
        state=state,
    )


def decision_values(m: SvcModel, X) -> np.ndarray:
    X = _as_features(X)
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(f"model expects {m.n_features} features, got {X.shape[1]}")
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK):
        block = X[start : start + _CHUNK]
        out[start : start + len(block)] = kernel_matrix(m.kernel, block, m.support_vectors) @ m.coefficients
    out += m.bias
    return out


def decision_value(m: SvcModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != m.n_features:
        raise DimensionMismatch(f"model expects {m.n_features} features, got {x.shape[0]}")
    return float(decision_values(m, x[None, :])[0])


def predict_many(m: SvcModel, X) -> np.ndarray:
    """Signs of the decision values; an exact zero counts as +1."""
    return np.where(decision_values(m, X) >= 0.0, 1, -1)


def predict(m: SvcModel, x) -> int:
    return 1 if decision_value(m, x) >= 0.0 else -1


def model_error(m: SvcModel, x, y: int) -> float:
    """Signed model error ``y - f(x)``."""
    return float(y) - decision_value(m, x)


def lipschitz_bound(m: SvcModel) -> float:
    """Upper bound on ``|f(x) - f(x')| / ||x - x'||``.

    For RBF the kernel gradient norm peaks at ``sqrt(2 gamma / e)``; for the
    linear kernel the bound is the norm of the weight vector.
    """
    if m.kernel.kind == LINEAR:
        return float(np.linalg.norm(m.coefficients @ m.support_vectors))
    return float(np.sum(np.abs(m.coefficients)) * math.sqrt(2.0 * m.kernel.gamma / math.e))


def model_to_json(m: SvcModel) -> dict:
    return {
        "kernel": m.kernel.kind,
        "gamma": m.kernel.gamma,
        "c": m.training_meta.get("c"),
        "bias": m.bias,
        "support_vectors": m.support_vectors.tolist(),
        "coefficients": m.coefficients.tolist(),
        "meta": {k: v for k, v in m.training_meta.items() if k != "c"},
    }


def model_from_json(obj: dict) -> SvcModel:
    meta = dict(obj.get("meta", {}))
    meta["c"] = obj.get("c")
    return SvcModel(
        support_vectors=np.array(obj["support_vectors"], dtype=float),
        coefficients=np.array(obj["coefficients"], dtype=float),
        bias=float(obj["bias"]),
        kernel=KernelSpec(obj["kernel"], obj.get("gamma")),
        training_meta=meta,
    )


def save_model(m: SvcModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json(m), fh)
        fh.write("\n")


def load_model(path) -> SvcModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
