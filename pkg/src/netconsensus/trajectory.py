"""Sampled trajectories shared by the integrators and the simulation layer."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    RUNNING = "running"
    CONVERGED = "converged"
    TIMED_OUT = "timed_out"
    DIVERGED = "diverged"
    FAILED = "failed"  # non-finite state produced by the right-hand side


@dataclass
class Trajectory:
    """Time samples of a flat state vector plus named monitor channels.

    ``blocks`` maps a block name (``"x"``, ``"v"``, ``"z"``, ...) to the slice
    of the flat state it occupies.
    """

    times: np.ndarray
    states: np.ndarray
    blocks: dict[str, slice] = field(default_factory=dict)
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    status: Status = Status.RUNNING
    status_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have the same number of samples")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def block(self, name: str) -> np.ndarray:
        return self.states[:, self.blocks[name]]

    @property
    def x(self) -> np.ndarray:
        return self.block("x")

    @property
    def v(self) -> np.ndarray | None:
        return self.block("v") if "v" in self.blocks else None

    @property
    def z(self) -> np.ndarray | None:
        return self.block("z") if "z" in self.blocks else None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_final(self) -> float:
        return float(self.times[-1])
