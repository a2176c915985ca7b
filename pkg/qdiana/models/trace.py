from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np

CSV_COLUMNS = (
    "k",
    "f_gap",
    "dist_sq",
    "lyapunov",
    "H",
    "D",
    "grad_norm_sq",
    "bits_up_cum",
    "bits_down_cum",
    "wall_ms",
)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    f_gap: float
    dist_sq: float
    lyapunov: float
    H: float
    D: float
    grad_norm_sq: float
    bits_up_cum: int
    bits_down_cum: int
    wall_ms: float = 0.0

    def as_row(self) -> List[Any]:
        return [getattr(self, column.name) for column in fields(self)]


@dataclass
class Trace:
    records: List[TraceRecord] = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    uplink_bits: int = 0
    downlink_bits: int = 0
    round_costs: List[List[int]] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    phase_seconds: Dict[str, float] = field(default_factory=dict)
    f_star: float = float("nan")
    omega: float = 0.0
    sigma_sq: float = float("nan")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(record, name) for record in self.records], dtype=np.float64)
