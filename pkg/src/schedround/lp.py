"""Time-indexed LPs for both objectives, with a pluggable solver front end.

A variable is keyed by (machine i, job j, start s) with integer s; a job
started at s keeps machine i busy for p_ij consecutive time slots starting
at slot s.  Capacity is one job per machine per slot, which yields the same
constraint matrix for both objectives; they differ in the objective
coefficients and in whether job coverage is an equality or a lower bound.

The default solver is HiGHS via scipy.  Any callable with the same
signature can be passed to :func:`solve_lp` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .instances import Instance

LE, EQ, GE = "<=", "=", ">="

#: right-hand-side residual allowed in returned solutions
FEAS_TOL = 1e-7
#: variable values below this are truncated to zero
TRUNCATE_TOL = 1e-9

VarKey = tuple[int, int, int]
Row = tuple[list[tuple[int, float]], str, float]


@dataclass
class LPModel:
    """A minimization LP with variables bounded to [0, inf)."""

    objective: list[float]
    rows: list[Row]
    var_keys: list[VarKey]
    horizon: int
    name: str = "lp"

    @property
    def num_vars(self) -> int:
        return len(self.objective)


def _checked_horizon(instance: Instance, horizon_cap: int) -> int:
    t = instance.horizon()
    if t > horizon_cap:
        raise ValueError("horizon too large for time-indexed LP")
    return t


def _variables(instance: Instance, horizon: int) -> list[VarKey]:
    keys = []
    for i in range(instance.m):
        for j in range(instance.n):
            pij = instance.p[i][j]
            if pij is None:
                continue
            keys.extend((i, j, s) for s in range(horizon - pij + 1))
    return keys


def _coverage_and_capacity(
    instance: Instance, horizon: int, keys: Sequence[VarKey], coverage_rel: str
) -> list[Row]:
    by_job: list[list[tuple[int, float]]] = [[] for _ in range(instance.n)]
    by_slot: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for idx, (i, j, s) in enumerate(keys):
        by_job[j].append((idx, 1.0))
        for t in range(s, s + instance.p[i][j]):
            by_slot.setdefault((i, t), []).append((idx, 1.0))
    rows: list[Row] = [(coeffs, coverage_rel, 1.0) for coeffs in by_job]
    rows.extend((by_slot[key], LE, 1.0) for key in sorted(by_slot))
    return rows


def build_rectangle_lp(instance: Instance, horizon_cap: int = 200) -> LPModel:
    """LP lower bound for total weighted completion time.

    Starting job j at s on machine i costs w_j * (s + p_ij); each job is
    covered exactly once and machine capacity is one job per slot.
    """
    horizon = _checked_horizon(instance, horizon_cap)
    keys = _variables(instance, horizon)
    objective = [instance.w[j] * float(s + instance.p[i][j]) for (i, j, s) in keys]
    rows = _coverage_and_capacity(instance, horizon, keys, EQ)
    return LPModel(objective, rows, keys, horizon, name="wct")


def build_lk_lp(instance: Instance, k: float, horizon_cap: int = 200) -> LPModel:
    """LP lower bound for the k-th power sum of machine loads.

    Starting job j at s on machine i costs (s + p_ij)^k - s^k, so a stack of
    jobs on one machine telescopes to load^k.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    horizon = _checked_horizon(instance, horizon_cap)
    if k * math.log(max(horizon, 2)) > 700:
        raise ValueError("L_k objective weights overflow double precision")
    keys = _variables(instance, horizon)
    objective = [float(s + instance.p[i][j]) ** k - float(s) ** k for (i, j, s) in keys]
    rows = _coverage_and_capacity(instance, horizon, keys, GE)
    return LPModel(objective, rows, keys, horizon, name="lk")


@dataclass
class FractionalSolution:
    """Sparse optimal solution of a time-indexed LP.

    Coverage per job is renormalized to sum to exactly 1; values below
    TRUNCATE_TOL are dropped so downstream rounding sees a clean support.
    """

    horizon: int
    x: dict[VarKey, float]
    x_ij: dict[tuple[int, int], float] = field(default_factory=dict)
    objective: float = 0.0

    def coverage(self, j: int) -> float:
        return sum(v for (i, jj, s), v in self.x.items() if jj == j)

    def max_capacity_residual(self, instance: Instance) -> float:
        """Largest amount by which any (machine, slot) capacity exceeds 1."""
        used: dict[tuple[int, int], float] = {}
        for (i, j, s), v in self.x.items():
            for t in range(s, s + instance.p[i][j]):
                used[(i, t)] = used.get((i, t), 0.0) + v
        return max((v - 1.0 for v in used.values()), default=0.0)


def solve_with_highs(model: LPModel) -> tuple[np.ndarray, float]:
    """Solve via scipy's HiGHS backend; returns (values, objective)."""
    n = model.num_vars
    eq_rows, ub_rows = [], []
    for coeffs, rel, rhs in model.rows:
        if rel == EQ:
            eq_rows.append((coeffs, rhs))
        elif rel == LE:
            ub_rows.append((coeffs, rhs))
        else:  # GE -> negate into <=
            ub_rows.append(([(i, -c) for i, c in coeffs], -rhs))

    def to_csr(rows):
        data, ri, ci = [], [], []
        for r, (coeffs, _) in enumerate(rows):
            for idx, c in coeffs:
                ri.append(r)
                ci.append(idx)
                data.append(c)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    kwargs = {}
    if eq_rows:
        kwargs["A_eq"] = to_csr(eq_rows)
        kwargs["b_eq"] = np.array([rhs for _, rhs in eq_rows])
    if ub_rows:
        kwargs["A_ub"] = to_csr(ub_rows)
        kwargs["b_ub"] = np.array([rhs for _, rhs in ub_rows])
    res = linprog(np.asarray(model.objective), bounds=(0, None), method="highs", **kwargs)
    if res.status == 2:
        raise ValueError(f"LP '{model.name}' is infeasible")
    assert res.status != 3, "time-indexed LPs are bounded by construction"
    if not res.success:
        raise RuntimeError(f"LP solve failed: {res.message}")
    return res.x, float(res.fun)


Solver = Callable[[LPModel], tuple[np.ndarray, float]]


def solve_lp(model: LPModel, solver: Solver | None = None) -> FractionalSolution:
    """Solve the model and return a cleaned sparse solution."""
    values, objective = (solver or solve_with_highs)(model)
    per_job: dict[int, float] = {}
    raw: dict[VarKey, float] = {}
    for key, v in zip(model.var_keys, values):
        if v >= TRUNCATE_TOL:
            raw[key] = float(v)
            per_job[key[1]] = per_job.get(key[1], 0.0) + float(v)
    x: dict[VarKey, float] = {}
    x_ij: dict[tuple[int, int], float] = {}
    for (i, j, s), v in raw.items():
        scaled = v / per_job[j]
        x[(i, j, s)] = scaled
        x_ij[(i, j)] = x_ij.get((i, j), 0.0) + scaled
    for j, total in per_job.items():
        if abs(total - 1.0) > FEAS_TOL:
            raise RuntimeError(f"job {j} coverage {total} deviates from 1 beyond tolerance")
    return FractionalSolution(model.horizon, x, x_ij, objective)


def write_lp_text(model: LPModel, fp) -> None:
    """Dump the model in the conventional LP interchange format."""

    def var(idx: int) -> str:
        i, j, s = model.var_keys[idx]
        return f"x_{i}_{j}_{s}"

    fp.write(f"\\ {model.name}\nMinimize\n obj:")
    for idx, c in enumerate(model.objective):
        fp.write(f" + {c!r} {var(idx)}")
    fp.write("\nSubject To\n")
    for r, (coeffs, rel, rhs) in enumerate(model.rows):
        terms = " ".join(f"+ {c!r} {var(idx)}" for idx, c in coeffs)
        op = {LE: "<=", EQ: "=", GE: ">="}[rel]
        fp.write(f" c{r}: {terms} {op} {rhs!r}\n")
    fp.write("Bounds\n")
    for idx in range(model.num_vars):
        fp.write(f" 0 <= {var(idx)}\n")
    fp.write("End\n")
