"""Binary linear SVMs trained by dual coordinate descent, with logistic
margin-to-confidence calibration.

The solver minimizes

    0.5 * ||w~||^2  +  sum_i U_i * max(0, 1 - y_i * (w~ . x~_i))

where x~ is the feature vector augmented with a constant 1 component (the
bias rides inside w~, keeping the dual box-constrained only) and U_i is the
per-example penalty (class-weighted C). The dual is solved coordinate-wise
in a freshly seeded permutation each epoch; the duality gap is evaluated at
every epoch end and doubles as the convergence certificate.

Confidence is the logistic map 1 / (1 + exp(A*margin + B)) with A < 0, so
larger margins always mean larger confidence.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateProblemError, ValidationError

_M64 = (1 << 64) - 1


@dataclass(frozen=True)
class SolverParams:
    """Hyperparameters shared by every SVM trained in one session."""

    c: float = 1.0
    tol: float = 1e-6
    max_iter: int = 10000
    class_weighted: bool = True  # C+ = C * n-/n+ in one-vs-all problems

    def __post_init__(self):
        if not (self.c > 0 and self.tol > 0 and self.max_iter >= 1):
            raise ValidationError("solver hyperparameters must be positive")


@dataclass(frozen=True, eq=False)
class SvmProblem:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) in {+1, -1}
    c: float = 1.0
    pos_weight: float = 1.0  # multiplies c for +1 rows
    neg_weight: float = 1.0

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValidationError("features must be (n, d) with one label per row")
        if not np.all(np.isfinite(x)):
            raise ValidationError("non-finite feature value")
        if not np.all(np.abs(y) == 1.0):
            raise ValidationError("labels must be +1 or -1")
        if not (y > 0).any() or not (y < 0).any():
            raise DegenerateProblemError("training set holds a single class")
        if not (self.c > 0 and self.pos_weight > 0 and self.neg_weight > 0):
            raise ValidationError("penalty weights must be positive")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)


@dataclass(frozen=True, eq=False)
class FitInfo:
    """Solver certificates attached to a trained SVM."""

    gap: float
    epochs: int
    converged: bool
    dual_objective: np.ndarray  # per-epoch dual values, non-decreasing
    alpha: np.ndarray  # final dual variables, one per training row
    box_violation: float  # max over all updates of max(-a_i, a_i - U_i); <= 0 iff feasible


@dataclass(frozen=True, eq=False)
class CalibratedSvm:
    """Linear decision function plus the logistic map from margin to (0,1)."""

    weights: np.ndarray  # (d,)
    bias: float
    cal_a: float = -1.0
    cal_b: float = 0.0
    identity: tuple[str, int] | None = None  # ("coarse", group) | ("fine", species)
    fit: FitInfo | None = None

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def margin(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"expected vector of dimension {self.dim}, got {x.shape}")
        return float(x @ self.weights + self.bias)

    def margins(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise ValidationError(f"expected (n, {self.dim}) matrix, got {xs.shape}")
        return xs @ self.weights + self.bias

    def confidence(self, x) -> float:
        return float(_logistic(self.cal_a * self.margin(x) + self.cal_b))

    def confidences(self, xs) -> np.ndarray:
        return _logistic(self.cal_a * self.margins(xs) + self.cal_b)


def _logistic(z):
    """1 / (1 + exp(z)), stable, clamped into the open interval (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    ez = np.exp(-z[pos])
    out[pos] = ez / (1.0 + ez)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return np.clip(out, 1e-300, 1.0 - 1e-16)


@njit(cache=True)
def _shuffle(perm, state):
    # Fisher-Yates driven by a splitmix64 stream; independent of numpy's RNG
    # so coordinate order is stable across platforms and library versions.
    for i in range(perm.shape[0] - 1, 0, -1):
        state = state + np.uint64(0x9E3779B97F4A7C15)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        j = int(z % np.uint64(i + 1))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return state


@njit(cache=True)
def _dual_cd(x, y, upper, tol, max_iter, seed):
    n, d = x.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qdiag = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += x[i, j] * x[i, j]
        qdiag[i] = acc
    perm = np.empty(n, dtype=np.int64)
    for i in range(n):
        perm[i] = i
    state = seed
    dual_hist = np.empty(max_iter)
    gap = np.inf
    epochs = 0
    box_violation = 0.0
    for epoch in range(max_iter):
        state = _shuffle(perm, state)
        for k in range(n):
            i = perm[k]
            g = 0.0
            for j in range(d):
                g += w[j] * x[i, j]
            g = g * y[i] - 1.0
            a = alpha[i]
            u = upper[i]
            if a <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif a >= u:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg != 0.0:
                na = a - g / qdiag[i]
                if na < 0.0:
                    na = 0.0
                elif na > u:
                    na = u
                delta = na - a
                if delta != 0.0:
                    alpha[i] = na
                    yi = y[i]
                    for j in range(d):
                        w[j] += delta * yi * x[i, j]
                    v = -na if -na > na - u else na - u
                    if v > box_violation:
                        box_violation = v
        wnorm2 = 0.0
        for j in range(d):
            wnorm2 += w[j] * w[j]
        asum = 0.0
        hinge = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += w[j] * x[i, j]
            slack = 1.0 - y[i] * acc
            if slack > 0.0:
                hinge += upper[i] * slack
            asum += alpha[i]
        dual = asum - 0.5 * wnorm2
        dual_hist[epoch] = dual
        gap = (0.5 * wnorm2 + hinge) - dual
        epochs = epoch + 1
        if gap <= tol:
            break
    return w, alpha, gap, epochs, dual_hist[:epochs].copy(), box_violation


def train(
    problem: SvmProblem,
    tol: float = 1e-6,
    max_iter: int = 10000,
    seed: int = 0,
    identity: tuple[str, int] | None = None,
) -> CalibratedSvm:
    """Solve the hinge-loss dual and return an (as yet uncalibrated) SVM.

    The returned model carries the default map A=-1, B=0 until
    :func:`calibrate` replaces it. Solver certificates (duality gap, epoch
    count, dual trace, dual variables) live in ``.fit``.
    """
    if tol <= 0 or max_iter < 1:
        raise ValidationError("tol must be positive and max_iter >= 1")
    x = problem.features
    n = x.shape[0]
    aug = np.concatenate([x, np.ones((n, 1))], axis=1)
    y = problem.labels
    upper = np.where(y > 0, problem.c * problem.pos_weight, problem.c * problem.neg_weight)
    w_aug, alpha, gap, epochs, hist, violation = _dual_cd(
        np.ascontiguousarray(aug),
        np.ascontiguousarray(y),
        np.ascontiguousarray(upper.astype(np.float64)),
        float(tol),
        int(max_iter),
        np.uint64(seed & _M64),
    )
    info = FitInfo(
        gap=float(gap),
        epochs=int(epochs),
        converged=bool(gap <= tol),
        dual_objective=hist,
        alpha=alpha,
        box_violation=float(violation),
    )
    return CalibratedSvm(
        weights=w_aug[:-1].copy(),
        bias=float(w_aug[-1]),
        identity=identity,
        fit=info,
    )


def _platt_objective(z, targets):
    pieces = np.where(z >= 0, targets * z, (targets - 1.0) * z)
    return float(np.sum(pieces + np.log1p(np.exp(-np.abs(z)))))


def _platt_fit(margins, positive, max_newton=100):
    """Fit (A, B) of 1/(1+exp(A*m+B)) by penalized maximum likelihood.

    Targets are the smoothed (N+1)/(N+2)-style values rather than raw 0/1
    labels, which regularizes the fit on separable data. Newton iterations
    with backtracking; everything is deterministic.
    """
    m = np.asarray(margins, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    prior1 = int(pos.sum())
    prior0 = m.shape[0] - prior1
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(pos, hi, lo)
    a, b = 0.0, math.log((prior0 + 1.0) / (prior1 + 1.0))
    sigma = 1e-12  # Hessian ridge
    fval = _platt_objective(a * m + b, t)
    for _ in range(max_newton):
        z = a * m + b
        p = _logistic(z)
        q = 1.0 - p
        d1 = t - p
        g1 = float(np.dot(m, d1))
        g2 = float(np.sum(d1))
        if max(abs(g1), abs(g2)) < 1e-10:
            break
        pq = p * q
        h11 = float(np.dot(m * m, pq)) + sigma
        h22 = float(np.sum(pq)) + sigma
        h21 = float(np.dot(m, pq))
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        descent = g1 * da + g2 * db
        step = 1.0
        while step >= 1e-10:
            na, nb = a + step * da, b + step * db
            nf = _platt_objective(na * m + nb, t)
            if nf < fval + 1e-4 * step * descent:
                a, b, fval = na, nb, nf
                break
            step *= 0.5
        else:
            break  # line search stalled; accept current point
    return a, b


def calibrate(svm: CalibratedSvm, features, labels) -> CalibratedSvm:
    """Fit the logistic margin map on labeled data and return a new SVM.

    Falls back to the fixed map A=-1, B=0 (with a warning) when the data
    holds a single class or the fit fails to produce a decreasing map.
    """
    y = np.asarray(labels, dtype=np.float64)
    if not np.all(np.abs(y) == 1.0):
        raise ValidationError("calibration labels must be +1 or -1")
    if not (y > 0).any() or not (y < 0).any():
        warnings.warn(
            "single-class calibration data; using the fixed map A=-1, B=0",
            stacklevel=2,
        )
        return dataclasses.replace(svm, cal_a=-1.0, cal_b=0.0)
    margins = svm.margins(features)
    a, b = _platt_fit(margins, y > 0)
    if not (math.isfinite(a) and math.isfinite(b)) or a >= 0:
        warnings.warn(
            "degenerate calibration fit; using the fixed map A=-1, B=0",
            stacklevel=2,
        )
        return dataclasses.replace(svm, cal_a=-1.0, cal_b=0.0)
    return dataclasses.replace(svm, cal_a=float(a), cal_b=float(b))


def mix_seed(*parts: int) -> int:
    """Stable integer mixing for per-SVM solver seeds (never Python hash())."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = (h ^ (p & _M64)) * 0xBF58476D1CE4E5B9 & _M64
        h ^= h >> 29
        h = (h * 0x94D049BB133111EB) & _M64
        h ^= h >> 32
    return h
