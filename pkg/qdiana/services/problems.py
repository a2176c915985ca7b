"""Finite-sum objectives f(x) = (1/n) Σ_i (1/m) Σ_j f_ij(x) plus a regularizer R.

The ridge term (λ₂/2)‖x‖² is folded into every component, so f_ij is
L-smooth and f_i is μ-strongly convex with μ = λ₂; R only carries the
non-smooth or extra part handled by prox.
"""
import hashlib
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.special import expit

from qdiana.exceptions import InvalidInputError, NotStronglyConvexError
from qdiana.models.problem import Regularizer
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import ProblemKind, RegularizerKind, StreamPurpose
from qdiana.utils.numerics import pairwise_mean

logger = logging.getLogger("Problems")

SOFTPLUS_BRANCH = 30.0
FD_ABSOLUTE_THRESHOLD = 1e-8


def softplus(t: np.ndarray) -> np.ndarray:
    """log(1 + exp(t)) without overflow."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    high = t > SOFTPLUS_BRANCH
    low = t < -SOFTPLUS_BRANCH
    middle = ~(high | low)
    out[high] = t[high] + np.log1p(np.exp(-t[high]))
    out[low] = np.exp(t[low])
    out[middle] = np.log1p(np.exp(t[middle]))
    return out


def prox(regularizer: Regularizer, gamma: float, x: np.ndarray) -> np.ndarray:
    if gamma <= 0:
        raise InvalidInputError(f"prox step must be positive, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    if regularizer.kind == RegularizerKind.NONE or regularizer.strength == 0.0:
        return np.array(x, copy=True)
    threshold = gamma * regularizer.strength
    if regularizer.kind == RegularizerKind.L1:
        return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)
    return x / (1.0 + threshold)


def regularizer_value(regularizer: Regularizer, x: np.ndarray) -> float:
    if regularizer.kind == RegularizerKind.NONE:
        return 0.0
    if regularizer.kind == RegularizerKind.L1:
        return regularizer.strength * float(np.sum(np.abs(x)))
    return 0.5 * regularizer.strength * float(np.dot(x, x))


@dataclass(frozen=True)
class ProblemConstants:
    L: float
    mu: float

    @property
    def kappa(self) -> float:
        if self.mu <= 0.0:
            raise NotStronglyConvexError("condition number requested for a problem with mu = 0")
        return (self.L + self.mu) / (2.0 * self.mu)

    def __iter__(self) -> Iterator[float]:
        yield self.L
        yield self.mu
        yield self.kappa


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    probe_count: int


class FiniteSumProblem:
    def __init__(
            self,
            kind: ProblemKind,
            lambda2: float = 0.0,
            regularizer: Optional[Regularizer] = None,
            features: Optional[np.ndarray] = None,
            labels: Optional[np.ndarray] = None,
            matrices: Optional[np.ndarray] = None,
            centers: Optional[np.ndarray] = None,
    ):
        if lambda2 < 0:
            raise InvalidInputError(f"lambda2 must be nonnegative, got {lambda2}")
        self.kind = kind
        self.lambda2 = float(lambda2)
        self.regularizer = regularizer or Regularizer()

        if kind == ProblemKind.LOGISTIC:
            if features is None or labels is None:
                raise InvalidInputError("logistic problems need features and labels")
            self.features = _frozen(features)
            self.labels = _frozen(labels)
            if self.features.ndim != 3 or self.labels.shape != self.features.shape[:2]:
                raise InvalidInputError("features must be (n, m, d) and labels (n, m)")
            if not np.all(np.abs(self.labels) == 1.0):
                raise InvalidInputError("labels must be in {-1, +1}")
            self.n, self.m, self.d = self.features.shape
        else:
            if matrices is None or centers is None:
                raise InvalidInputError("quadratic problems need matrices and centers")
            self.matrices = _frozen(matrices)
            self.centers = _frozen(centers)
            if self.centers.ndim != 3 or self.matrices.shape != self.centers.shape + (self.centers.shape[2],):
                raise InvalidInputError("matrices must be (n, m, d, d) and centers (n, m, d)")
            self.n, self.m, self.d = self.centers.shape

        if min(self.n, self.m, self.d) < 1:
            raise InvalidInputError("problem needs at least one worker, component and coordinate")
        self._constants: Optional[ProblemConstants] = None

    def check_index(self, i: int, j: Optional[int] = None) -> None:
        if not 0 <= i < self.n or (j is not None and not 0 <= j < self.m):
            raise InvalidInputError(f"component index ({i}, {j}) out of range for n={self.n}, m={self.m}")

    def check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise InvalidInputError(f"point has shape {x.shape}, expected ({self.d},)")
        return x

    def component(self, i: int, j: int, x: np.ndarray) -> Tuple[float, np.ndarray]:
        self.check_index(i, j)
        x = self.check_point(x)
        ridge = 0.5 * self.lambda2 * float(np.dot(x, x))

        if self.kind == ProblemKind.LOGISTIC:
            a = self.features[i, j]
            b = self.labels[i, j]
            margin = b * float(np.dot(a, x))
            loss = float(softplus(np.array([-margin]))[0]) + ridge
            gradient = (-b * float(expit(-margin))) * a + self.lambda2 * x
            return loss, gradient

        residual = x - self.centers[i, j]
        curvature = self.matrices[i, j] @ residual
        return 0.5 * float(np.dot(residual, curvature)) + ridge, curvature + self.lambda2 * x

    def component_gradients(self, i: int, x: np.ndarray) -> np.ndarray:
        """All m component gradients of worker i at x as an (m, d) matrix."""
        self.check_index(i)
        x = self.check_point(x)
        if self.kind == ProblemKind.LOGISTIC:
            margins = self.labels[i] * (self.features[i] @ x)
            weights = -self.labels[i] * expit(-margins)
            return weights[:, np.newaxis] * self.features[i] + self.lambda2 * x

        residuals = x - self.centers[i]
        return np.einsum("jkl,jl->jk", self.matrices[i], residuals) + self.lambda2 * x

    def component_losses(self, i: int, x: np.ndarray) -> np.ndarray:
        self.check_index(i)
        x = self.check_point(x)
        ridge = 0.5 * self.lambda2 * float(np.dot(x, x))
        if self.kind == ProblemKind.LOGISTIC:
            margins = self.labels[i] * (self.features[i] @ x)
            return softplus(-margins) + ridge

        residuals = x - self.centers[i]
        curvature = np.einsum("jkl,jl->jk", self.matrices[i], residuals)
        return 0.5 * np.einsum("jk,jk->j", residuals, curvature) + ridge

    def worker_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return np.mean(self.component_gradients(i, x), axis=0)

    def worker_value(self, i: int, x: np.ndarray) -> float:
        return float(np.mean(self.component_losses(i, x)))

    def worker_gradients(self, x: np.ndarray) -> np.ndarray:
        return np.stack([self.worker_gradient(i, x) for i in range(self.n)])

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return pairwise_mean([self.worker_gradient(i, x) for i in range(self.n)])

    def smooth_value(self, x: np.ndarray) -> float:
        return float(np.mean([self.worker_value(i, x) for i in range(self.n)]))

    def objective(self, x: np.ndarray) -> float:
        """Composite value f(x) + R(x)."""
        return self.smooth_value(x) + regularizer_value(self.regularizer, x)

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        return prox(self.regularizer, gamma, x)

    @property
    def constants(self) -> ProblemConstants:
        if self._constants is None:
            self._constants = _compute_constants(self)
        return self._constants

    @property
    def L(self) -> float:
        return self.constants.L

    @property
    def mu(self) -> float:
        return self.constants.mu

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(f"{self.kind.value}:{self.n}:{self.m}:{self.d}:{self.lambda2!r}".encode())
        digest.update(f"{self.regularizer.kind.value}:{self.regularizer.strength!r}".encode())
        arrays = (self.features, self.labels) if self.kind == ProblemKind.LOGISTIC else (self.matrices, self.centers)
        for array in arrays:
            digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
        return digest.hexdigest()


def _frozen(array: np.ndarray) -> np.ndarray:
    frozen = np.array(array, dtype=np.float64, copy=True)
    frozen.setflags(write=False)
    return frozen


def _compute_constants(problem: FiniteSumProblem) -> ProblemConstants:
    if problem.kind == ProblemKind.LOGISTIC:
        # sigmoid' <= 1/4 bounds every component Hessian by a a^T / 4 + lambda2 I
        row_norms = np.einsum("ijk,ijk->ij", problem.features, problem.features)
        return ProblemConstants(L=float(row_norms.max()) / 4.0 + problem.lambda2, mu=problem.lambda2)

    largest = 0.0
    for i in range(problem.n):
        for j in range(problem.m):
            eigenvalues = scipy.linalg.eigvalsh(problem.matrices[i, j])
            largest = max(largest, float(eigenvalues[-1]))
    smallest = min(
        float(scipy.linalg.eigvalsh(np.mean(problem.matrices[i], axis=0))[0]) for i in range(problem.n)
    )
    return ProblemConstants(L=largest + problem.lambda2, mu=max(smallest, 0.0) + problem.lambda2)


def evaluate_component(problem: FiniteSumProblem, i: int, j: int, x: np.ndarray) -> Tuple[float, np.ndarray]:
    return problem.component(i, j, x)


def constants(problem: FiniteSumProblem) -> ProblemConstants:
    return problem.constants


def logistic_problem(
        features: np.ndarray,
        labels: np.ndarray,
        lambda2: float,
        regularizer: Optional[Regularizer] = None
) -> FiniteSumProblem:
    return FiniteSumProblem(ProblemKind.LOGISTIC, lambda2, regularizer, features=features, labels=labels)


def quadratic_problem(
        matrices: np.ndarray,
        centers: np.ndarray,
        lambda2: float = 0.0,
        regularizer: Optional[Regularizer] = None
) -> FiniteSumProblem:
    return FiniteSumProblem(ProblemKind.QUADRATIC, lambda2, regularizer, matrices=matrices, centers=centers)


def fd_check(
        problem: FiniteSumProblem,
        x: np.ndarray,
        h: float = 1e-5,
        probes: int = 5,
        seed: int = 0
) -> GradCheckReport:
    """Compares analytic component gradients with central differences.

    The error of a probe is measured against the larger of the two gradients'
    max-norms; probes whose gradients both vanish below 1e-8 use absolute error.
    """
    if h <= 0:
        raise InvalidInputError(f"finite-difference step must be positive, got {h}")
    x = problem.check_point(x)
    rng = RandomStreams(seed).generator(0, StreamPurpose.PROBE, 0)
    worst = 0.0

    for probe in range(max(probes, 1)):
        i = int(rng.integers(problem.n))
        j = int(rng.integers(problem.m))
        point = x if probe == 0 else x + 0.5 * rng.standard_normal(problem.d)
        _, analytic = problem.component(i, j, point)

        numeric = np.empty(problem.d)
        for k in range(problem.d):
            step = np.zeros(problem.d)
            step[k] = h
            forward, _ = problem.component(i, j, point + step)
            backward, _ = problem.component(i, j, point - step)
            numeric[k] = (forward - backward) / (2.0 * h)

        scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))))
        error = float(np.max(np.abs(numeric - analytic)))
        if scale >= FD_ABSOLUTE_THRESHOLD:
            error /= scale
        elif error <= FD_ABSOLUTE_THRESHOLD:
            error = 0.0
        worst = max(worst, error)

    return GradCheckReport(max_relative_error=worst, probe_count=max(probes, 1))


def smoothness_ratio(problem: FiniteSumProblem, pairs: int = 100, seed: int = 0, scale: float = 1.0) -> float:
    """Largest observed ||grad f_ij(x) - grad f_ij(y)|| / ||x - y|| over random pairs."""
    rng = RandomStreams(seed).generator(1, StreamPurpose.PROBE, 0)
    worst = 0.0
    for _ in range(pairs):
        i, j = int(rng.integers(problem.n)), int(rng.integers(problem.m))
        x = scale * rng.standard_normal(problem.d)
        y = scale * rng.standard_normal(problem.d)
        _, gx = problem.component(i, j, x)
        _, gy = problem.component(i, j, y)
        worst = max(worst, float(np.linalg.norm(gx - gy) / np.linalg.norm(x - y)))
    return worst


def coercivity_ratio(problem: FiniteSumProblem, pairs: int = 100, seed: int = 0, scale: float = 1.0) -> float:
    """Smallest observed <grad f_i(x) - grad f_i(y), x - y> / ||x - y||^2 over random pairs."""
    rng = RandomStreams(seed).generator(2, StreamPurpose.PROBE, 0)
    best = np.inf
    for _ in range(pairs):
        i = int(rng.integers(problem.n))
        x = scale * rng.standard_normal(problem.d)
        y = scale * rng.standard_normal(problem.d)
        difference = x - y
        inner = float(np.dot(problem.worker_gradient(i, x) - problem.worker_gradient(i, y), difference))
        best = min(best, inner / float(np.dot(difference, difference)))
    return float(best)
