from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from qdiana.models.quantizer import QuantizedMessage


@dataclass(frozen=True)
class WorkerState:
    """Local memory of worker i.

    `table` holds the SAGA gradients ∇f_ij(w_ij) (m × d); `anchor` is the
    L-SVRG/SVRG reference point and `mu` the mean gradient that pairs with
    whichever memory is in use.
    """

    index: int
    h: np.ndarray
    table: Optional[np.ndarray] = None
    anchor: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MasterState:
    x: np.ndarray
    shifts: np.ndarray
    h_mean: np.ndarray
    k: int = 0
    epoch: int = 0
    anchor: Optional[np.ndarray] = None
    epoch_sum: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return int(self.shifts.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class RoundLog:
    k: int
    messages: Tuple[QuantizedMessage, ...]
    uplink_bits: int
    downlink_bits: int
    estimates: np.ndarray
    aggregate: np.ndarray
    sampled: Tuple[int, ...] = field(default_factory=tuple)
    coin: Optional[bool] = None
    epoch_started: bool = False
