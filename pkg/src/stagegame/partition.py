"""Step-size sequences: finite partitions of [0, t] and lazy infinite ones."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Stage durations h_1, ..., h_k with 0 < h_i <= 1."""

    steps: tuple[float, ...]

    def __post_init__(self):
        steps = tuple(float(h) for h in self.steps)
        for i, h in enumerate(steps):
            if not 0.0 < h <= 1.0:
                raise PartitionError(f"step h_{i + 1}={h} outside (0, 1]")
        object.__setattr__(self, "steps", steps)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def sigma(self) -> np.ndarray:
        """Prefix sums sigma_k = h_1 + ... + h_k (sigma_0 = 0 included)."""
        return np.concatenate([[0.0], np.cumsum(self.steps)])

    @property
    def tau(self) -> np.ndarray:
        """Prefix sums of squares tau_k, tau_0 = 0 included."""
        return np.concatenate([[0.0], np.cumsum(np.square(self.steps))])

    @property
    def total(self) -> float:
        return float(np.sum(self.steps)) if self.steps else 0.0

    @property
    def mesh(self) -> float:
        return max(self.steps) if self.steps else 0.0

    def reversed(self) -> "Partition":
        return Partition(self.steps[::-1])

    @classmethod
    def uniform(cls, t: float, n: int) -> "Partition":
        if n < 1:
            raise PartitionError("uniform partition needs n >= 1")
        return cls((t / n,) * n)

    @classmethod
    def random(cls, rng: np.random.Generator, t: float, mesh: float) -> "Partition":
        """Random partition of [0, t] with every step in (0, mesh]."""
        steps: list[float] = []
        left = t
        while left > 1e-12:
            h = min(left, rng.uniform(0.2 * mesh, mesh))
            steps.append(h)
            left -= h
        return cls(tuple(steps))


def uniform_steps(h: float) -> Iterator[float]:
    return itertools.repeat(float(h))


def cycled_steps(steps: Iterable[float]) -> Iterator[float]:
    steps = list(steps)
    if not steps:
        raise PartitionError("cannot cycle an empty step list")
    return itertools.cycle(steps)


def geometric_steps(h0: float, ratio: float, floor: float = 1e-3) -> Iterator[float]:
    """h0, h0*ratio, ... clamped to [floor, 1]; the clamp keeps sum(h_i) infinite."""
    if floor <= 0:
        raise PartitionError("geometric steps need a positive floor")
    h = h0
    while True:
        yield min(1.0, max(floor, h))
        h *= ratio


def parse_partition(text: str) -> Partition:
    """Parse the command-line grammar.

    ``uniform:t=1,n=8`` | ``list:0.5,0.25,0.25`` |
    ``geometric:h0=0.5,ratio=0.5,total=2[,min=0.001]``; a geometric
    partition is cut so its steps add up to ``total``.
    """
    kind, _, body = text.partition(":")
    try:
        if kind == "list":
            return Partition(tuple(float(v) for v in body.split(",") if v))
        kv = dict(item.split("=", 1) for item in body.split(",") if item)
        if kind == "uniform":
            return Partition.uniform(float(kv["t"]), int(kv["n"]))
        if kind == "geometric":
            total = float(kv["total"])
            gen = geometric_steps(float(kv["h0"]), float(kv["ratio"]),
                                  float(kv.get("min", 1e-3)))
            steps: list[float] = []
            acc = 0.0
            for h in gen:
                if acc + h >= total - 1e-12:
                    steps.append(total - acc)
                    break
                steps.append(h)
                acc += h
            return Partition(tuple(s for s in steps if s > 1e-12))
    except (KeyError, ValueError) as exc:
        raise PartitionError(f"bad partition {text!r}: {exc}") from None
    raise PartitionError(f"unknown partition kind {kind!r}")
