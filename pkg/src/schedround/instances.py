"""Unrelated-machine scheduling instances, schedules, and objective evaluation.

Processing times are positive integers; ``None`` marks a forbidden
(machine, job) placement.  Weights are positive integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

#: job -> machine, as a tuple of machine indices
Assignment = tuple[int, ...]


@dataclass(frozen=True)
class Instance:
    """A scheduling instance: ``p[i][j]`` is job ``j``'s time on machine ``i``."""

    m: int
    n: int
    w: tuple[int, ...]
    p: tuple[tuple[int | None, ...], ...]

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("need at least one machine and one job")
        if len(self.w) != self.n:
            raise ValueError("weight vector length does not match n")
        if len(self.p) != self.m or any(len(row) != self.n for row in self.p):
            raise ValueError("processing-time matrix shape does not match (m, n)")
        for wj in self.w:
            if not isinstance(wj, int) or wj < 1:
                raise ValueError(f"weights must be positive integers, got {wj!r}")
        for row in self.p:
            for v in row:
                if v is not None and (not isinstance(v, int) or v < 1):
                    raise ValueError(f"processing times must be positive integers or None, got {v!r}")
        for j in range(self.n):
            if all(self.p[i][j] is None for i in range(self.m)):
                raise ValueError(f"job {j} has no machine with finite processing time")

    def finite_machines(self, j: int) -> list[int]:
        return [i for i in range(self.m) if self.p[i][j] is not None]

    def max_finite_p(self, j: int) -> int:
        return max(self.p[i][j] for i in self.finite_machines(j))

    def horizon(self) -> int:
        """Latest completion time any reasonable schedule can need."""
        return sum(self.max_finite_p(j) for j in range(self.n))

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "weights": list(self.w), "p": [list(row) for row in self.p]}

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        return cls(
            m=int(d["m"]),
            n=int(d["n"]),
            w=tuple(int(x) for x in d["weights"]),
            p=tuple(tuple(None if v is None else int(v) for v in row) for row in d["p"]),
        )


def save_instance(instance: Instance, path: str) -> None:
    """Write an instance as JSON (``null`` encodes a forbidden placement)."""
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(instance.to_dict(), fp, indent=1)
        fp.write("\n")


def load_instance(path: str) -> Instance:
    with open(path, encoding="utf-8") as fp:
        return Instance.from_dict(json.load(fp))


@dataclass(frozen=True)
class Schedule:
    """An assignment plus, per machine, the processing order of its jobs."""

    assignment: Assignment
    order: tuple[tuple[int, ...], ...]

    def validate(self, instance: Instance) -> None:
        if len(self.assignment) != instance.n:
            raise ValueError("assignment does not cover all jobs")
        if len(self.order) != instance.m:
            raise ValueError("order does not cover all machines")
        for j, i in enumerate(self.assignment):
            if not 0 <= i < instance.m or instance.p[i][j] is None:
                raise ValueError(f"job {j} placed on infeasible machine {i}")
        for i, jobs in enumerate(self.order):
            expected = sorted(j for j in range(instance.n) if self.assignment[j] == i)
            if sorted(jobs) != expected:
                raise ValueError(f"machine {i} order does not match its assigned jobs")


def smith_order(instance: Instance, machine: int, jobs: Iterable[int]) -> list[int]:
    """Jobs sorted by non-decreasing p/w ratio on the machine, ties by index."""
    jobs = list(jobs)
    for j in jobs:
        if instance.p[machine][j] is None:
            raise ValueError("infeasible placement")
    return sorted(jobs, key=lambda j: (Fraction(instance.p[machine][j], instance.w[j]), j))


def eval_wct(instance: Instance, schedule: Schedule) -> int:
    """Total weighted completion time of a schedule."""
    total = 0
    for i, jobs in enumerate(schedule.order):
        t = 0
        for j in jobs:
            pij = instance.p[i][j]
            if pij is None:
                raise ValueError("infeasible placement")
            t += pij
            total += instance.w[j] * t
    return total


def machine_loads(instance: Instance, assignment: Sequence[int]) -> list[int]:
    loads = [0] * instance.m
    for j, i in enumerate(assignment):
        pij = instance.p[i][j]
        if pij is None:
            raise ValueError("infeasible placement")
        loads[i] += pij
    return loads


@dataclass(frozen=True)
class LkValue:
    power_sum: float
    norm: float


def eval_lk(instance: Instance, assignment: Sequence[int], k: float) -> LkValue:
    """Sum of k-th powers of machine loads, and its k-th root."""
    if k < 1:
        raise ValueError("k must be at least 1")
    power_sum = float(sum(load**k for load in machine_loads(instance, assignment)))
    return LkValue(power_sum, power_sum ** (1.0 / k))
