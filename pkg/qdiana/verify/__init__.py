from dataclasses import dataclass
from types import ModuleType
from typing import List, Optional, Sequence

from scipy.stats import norm

from config import settings
from qdiana.utils.discovery import discover_modules


@dataclass(frozen=True)
class VerifyProfile:
    quick: bool
    samples: int
    vectors: int
    contraction_seeds: int
    trajectory_seeds: int
    rate_seeds: int
    seed: int

    @classmethod
    def from_settings(cls, quick: bool = False) -> "VerifyProfile":
        verify = settings.verify
        return cls(
            quick=quick,
            samples=verify.quick_samples if quick else verify.samples,
            vectors=verify.quick_vectors if quick else verify.vectors,
            contraction_seeds=verify.quick_contraction_seeds if quick else verify.contraction_seeds,
            trajectory_seeds=verify.quick_trajectory_seeds if quick else verify.trajectory_seeds,
            rate_seeds=verify.quick_rate_seeds if quick else verify.rate_seeds,
            seed=verify.seed,
        )


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f" ({self.detail})" if self.detail else "")


def z_threshold(tests: int, base: float = 4.0, family_error: float = 1e-3) -> float:
    """Standard-error multiplier: `base`, widened to a Bonferroni bound when many coordinates are tested."""
    return max(base, float(norm.isf(family_error / (2.0 * max(tests, 1)))))


def get_all_suites(names: Optional[Sequence[str]] = None) -> List[ModuleType]:
    """
    Discovers verification suites in this package.
    Each suite module has a NAME, a run(profile) function returning PropertyResults
    and an optional PRIORITY (lower runs first).
    """
    suites = discover_modules(__name__, __path__, "run")
    if names:
        suites = [module for module in suites if module.NAME in names]
    return suites
