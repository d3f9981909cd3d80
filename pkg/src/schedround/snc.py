"""Randomized job-to-group assignment with strong negative correlation.

Input: a set of groups, each living on a machine, and a fractional matching
y between groups and jobs where every job's row sums to 1 and every group
carries total mass at most 1.  Output: one group per job such that

* marginals are exact (job j lands in group u with probability y_uj),
* two jobs land on groups of a same machine with probability at most the
  product of marginals, and
* two jobs land in the same group u with probability at most
  (1 - eta) * y_uj * y_uj', with eta = 0.1561, whenever the machine of u
  holds at most half of each job's mass ("dominates" neither job).

The rounding runs in four stages:

1. every job draws two candidate groups by placing all groups on a circle
   (contiguously by machine) and reading off two antipodal points, so the
   candidates sit on different machines unless one machine is unavoidable;
   candidate edges whose machine does not dominate the job are then "marked"
   with probability (1 - exp(-2 y_uj)) / (2 y_uj);
2. each group pairs its incident marked edges uniformly at random and is
   split into copies of degree at most two, so components of the resulting
   graph are alternating paths and cycles;
3. components are cut into short segments (paths of 4 or 6 edges ending at
   group copies; short cycles count whole);
4. each segment flips one fair coin sending all its jobs to the groups
   before them or all to the groups after them; jobs left out of every
   segment flip individual fair coins between their two candidates.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from random import Random
from typing import Mapping, Sequence

from .seeds import derive_seed

ROW_TOL = 1e-9
DOMINANCE_SNAP = 1e-12

Edge = tuple[int, int]  # (job, candidate slot 0 or 1)


def dominates(mass: float) -> bool:
    """A machine dominates a job when it holds more than half the job's mass."""
    if abs(mass - 0.5) <= DOMINANCE_SNAP:
        return False
    return mass > 0.5


def mark_probability(y: float) -> float:
    """Marking probability for a candidate edge of mass y; tends to 1 as y -> 0."""
    if y <= 0:
        raise ValueError("edge mass must be positive")
    if y < 1e-12:
        return 1.0
    return -math.expm1(-2.0 * y) / (2.0 * y)


class SNCInput:
    """Groups with machine labels plus a fractional group/job matching.

    ``machine_of[u]`` is the machine of group u and ``y`` maps (group, job)
    to mass.  Every job's column must sum to 1 (within ROW_TOL) and every
    group's total mass must be at most 1 (within ROW_TOL).
    """

    def __init__(self, machine_of: Sequence[int], y: Mapping[tuple[int, int], float]):
        self.machine_of = tuple(int(i) for i in machine_of)
        self.n_groups = len(self.machine_of)
        self.y = {k: float(v) for k, v in y.items() if v > 0.0}
        if not self.y:
            raise ValueError("empty matching")
        self.n_jobs = max(j for _, j in self.y) + 1
        group_mass = [0.0] * self.n_groups
        per_job: list[list[tuple[int, int, float]]] = [[] for _ in range(self.n_jobs)]
        for (u, j), v in self.y.items():
            if not 0 <= u < self.n_groups:
                raise ValueError(f"unknown group {u}")
            if v > 1.0 + ROW_TOL:
                raise ValueError(f"edge mass {v} above 1")
            group_mass[u] += v
            per_job[j].append((self.machine_of[u], u, v))
        for u, mass in enumerate(group_mass):
            if mass > 1.0 + ROW_TOL:
                raise ValueError(f"group {u} carries total mass {mass} > 1")
        self._row_groups: list[list[int]] = []
        self._bounds: list[list[float]] = []
        self._mark_p: list[dict[int, float]] = []
        self._dom: list[frozenset[int]] = []
        self.machine_mass: list[dict[int, float]] = []
        for j, entries in enumerate(per_job):
            entries.sort()
            total = sum(v for _, _, v in entries)
            if abs(total - 1.0) > ROW_TOL:
                raise ValueError(f"job {j} has total mass {total}, expected 1")
            groups, bounds, acc = [], [], 0.0
            mass_by_machine: dict[int, float] = {}
            for i, u, v in entries:
                groups.append(u)
                acc += v
                bounds.append(acc)
                mass_by_machine[i] = mass_by_machine.get(i, 0.0) + v
            self._row_groups.append(groups)
            self._bounds.append(bounds)
            self._mark_p.append({u: mark_probability(v) for _, u, v in entries})
            self._dom.append(frozenset(i for i, mv in mass_by_machine.items() if dominates(mv)))
            self.machine_mass.append(mass_by_machine)

    def dominating_machines(self, j: int) -> frozenset[int]:
        return self._dom[j]

    def locate(self, j: int, t: float) -> int:
        """Group whose arc on job j's circle covers position t in [0, 1)."""
        idx = bisect_right(self._bounds[j], t)
        groups = self._row_groups[j]
        return groups[idx] if idx < len(groups) else groups[-1]

    def __reduce__(self):
        return (SNCInput, (self.machine_of, self.y))


def choose_candidates(inp: SNCInput, j: int, rng: Random) -> tuple[int, int]:
    """Draw the two candidate groups of job j from antipodal circle points."""
    t = rng.random()
    return inp.locate(j, t), inp.locate(j, (t + 0.5) % 1.0)


def mark_edges(inp: SNCInput, candidates: Sequence[tuple[int, int]], rng: Random) -> set[Edge]:
    """Mark candidate edges independently; edges of a dominating machine never are."""
    marked: set[Edge] = set()
    for j, pair in enumerate(candidates):
        dom = inp._dom[j]
        mark_p = inp._mark_p[j]
        for slot in (0, 1):
            u = pair[slot]
            if inp.machine_of[u] in dom:
                continue
            if rng.random() < mark_p[u]:
                marked.add((j, slot))
    return marked


def pair_edges(edges: Sequence[Edge], rng: Random) -> tuple[list[tuple[Edge, Edge]], Edge | None]:
    """Uniformly random near-perfect pairing of an edge list (at most 1 leftover).

    A uniform shuffle followed by pairing consecutive entries realizes the
    uniform distribution over pairings and over the leftover edge.
    """
    pool = list(edges)
    rng.shuffle(pool)
    pairs = [(pool[i], pool[i + 1]) for i in range(0, len(pool) - 1, 2)]
    leftover = pool[-1] if len(pool) % 2 else None
    return pairs, leftover


def pair_marked_edges(
    candidates: Sequence[tuple[int, int]], marked: set[Edge], rng: Random
) -> dict[int, tuple[list[tuple[Edge, Edge]], Edge | None]]:
    """Pair the marked edges incident to each group, group by group."""
    by_group: dict[int, list[Edge]] = {}
    for j, slot in sorted(marked):
        by_group.setdefault(candidates[j][slot], []).append((j, slot))
    return {u: pair_edges(by_group[u], rng) for u in sorted(by_group)}


@dataclass(frozen=True)
class Component:
    """A path or cycle of the split graph.

    ``seq`` alternates copy ids (even positions) and jobs (odd positions);
    paths start and end at copies, cycles wrap around implicitly.
    """

    kind: str  # "path" | "cycle"
    seq: tuple[int, ...]


@dataclass
class SplitGraph:
    copy_group: list[int]
    copy_edges: list[tuple[Edge, ...]]
    components: list[Component]


def build_split_graph(
    machine_of: Sequence[int],
    candidates: Sequence[tuple[int, int]],
    pairings: Mapping[int, tuple[list[tuple[Edge, Edge]], Edge | None]],
) -> SplitGraph:
    """Split each group into degree-<=2 copies: one per pair, one per loose edge."""
    copy_group: list[int] = []
    copy_edges: list[tuple[Edge, ...]] = []
    edge_copy: dict[Edge, int] = {}

    def new_copy(u: int, edges: tuple[Edge, ...]) -> None:
        cid = len(copy_group)
        copy_group.append(u)
        copy_edges.append(edges)
        for e in edges:
            edge_copy[e] = cid

    for u in sorted(pairings):
        for e1, e2 in pairings[u][0]:
            assert e1[0] != e2[0], "parallel edges of one job can never be paired"
            new_copy(u, (e1, e2))
    for j, pair in enumerate(candidates):
        for slot in (0, 1):
            e = (j, slot)
            if e not in edge_copy:
                new_copy(pair[slot], (e,))

    components = _trace_components(copy_group, copy_edges, edge_copy)
    for comp in components:
        n = len(comp.seq)
        if comp.kind == "cycle":
            assert n >= 4, "length-2 cycles cannot arise"
        elif n < 5:
            continue
        for pos in range(1, n, 2):
            left = machine_of[copy_group[comp.seq[pos - 1]]]
            right = machine_of[copy_group[comp.seq[(pos + 1) % n]]]
            assert left != right, "job between two copies of one machine outside a 2-path"
    return SplitGraph(copy_group, copy_edges, components)


def _trace_components(
    copy_group: list[int], copy_edges: list[tuple[Edge, ...]], edge_copy: dict[Edge, int]
) -> list[Component]:
    seen = [False] * len(copy_group)
    comps: list[Component] = []
    for start in range(len(copy_group)):
        if seen[start] or len(copy_edges[start]) != 1:
            continue
        seen[start] = True
        seq: list[int] = [start]
        edge = copy_edges[start][0]
        while True:
            j = edge[0]
            seq.append(j)
            other = (j, 1 - edge[1])
            nxt = edge_copy[other]
            seq.append(nxt)
            seen[nxt] = True
            es = copy_edges[nxt]
            if len(es) == 1:
                break
            edge = es[0] if es[1] == other else es[1]
        comps.append(Component("path", tuple(seq)))
    for start in range(len(copy_group)):
        if seen[start]:
            continue
        seen[start] = True
        seq = [start]
        edge = copy_edges[start][0]
        while True:
            j = edge[0]
            seq.append(j)
            other = (j, 1 - edge[1])
            nxt = edge_copy[other]
            if nxt == start:
                break
            seq.append(nxt)
            seen[nxt] = True
            es = copy_edges[nxt]
            edge = es[0] if es[1] == other else es[1]
        comps.append(Component("cycle", tuple(seq)))
    return comps


@dataclass(frozen=True)
class Segment:
    """A short alternating sequence copy-job-...-copy rounded by one coin.

    ``vertices`` has length 5 or 7 with copies at even positions; a segment
    cut from a 4- or 6-cycle repeats the starting copy at the end and has
    every copy as a center.
    """

    vertices: tuple[int, ...]
    centers: tuple[int, ...]
    from_cycle: bool = False


def path_segments(seq: Sequence[int], parity: int) -> list[Segment]:
    """Length-4 segments of a path, anchored at odd (parity 0) or even offsets."""
    return [
        Segment(tuple(seq[pos : pos + 5]), (seq[pos + 2],))
        for pos in range(2 * parity, len(seq) - 4, 4)
    ]


def segment_path(seq: Sequence[int], rng: Random) -> list[Segment]:
    """Cut a path into segments; every internal copy is a center w.p. 1/2."""
    return path_segments(seq, 0 if rng.random() < 0.5 else 1)


def cycle_choice_space(length: int) -> list[int | None]:
    """The discrete random choices the cycle segmentation draws from, uniformly.

    4/6-cycles need no choice; multiples of 4 pick one of two partitions;
    long cycles of length 2 mod 4 delete one of length/2 jobs (returned as
    the job's odd vertex index); 10/14-cycles flip one bit.
    """
    if length in (4, 6):
        return [None]
    if length % 4 == 0 or length in (10, 14):
        return [0, 1]
    return list(range(1, length, 2))


def cycle_segments(seq: Sequence[int], copy_machine: Sequence[int], choice: int | None) -> list[Segment]:
    """Deterministic segmentation of a cycle given its random choice token."""
    n = len(seq)

    def rot(start: int, count: int) -> list[int]:
        return [seq[(start + i) % n] for i in range(count)]

    def chop(path: list[int]) -> list[Segment]:
        return [
            Segment(tuple(path[pos : pos + 5]), (path[pos + 2],))
            for pos in range(0, len(path) - 4, 4)
        ]

    if n in (4, 6):
        start = min(range(0, n, 2), key=lambda idx: seq[idx])
        verts = tuple(rot(start, n)) + (seq[start],)
        return [Segment(verts, tuple(verts[0:-1:2]), from_cycle=True)]

    if n % 4 == 0:
        segs = []
        for a in range(n // 4):
            verts = rot((2 * choice + 4 * a) % n, 5)
            segs.append(Segment(tuple(verts), (verts[2],)))
        return segs

    if n >= 18:
        # choice is the deleted job's vertex index; chop the remaining path
        return chop(rot(choice + 1, n - 1))

    # length 10 or 14: place one valid length-6 segment, then either keep it
    # or delete the job between its two centers, chopping the rest in fours
    pos6 = None
    for gpos in range(0, n, 2):
        ends_ok = copy_machine[seq[gpos]] != copy_machine[seq[(gpos + 4) % n]]
        ends_ok = ends_ok and copy_machine[seq[(gpos + 6) % n]] != copy_machine[seq[(gpos + 2) % n]]
        if ends_ok:
            pos6 = gpos
            break
    if pos6 is None:
        raise AssertionError("no valid length-6 segment in a short 2-mod-4 cycle")
    if choice == 0:
        verts = rot(pos6, 7)
        six = Segment(tuple(verts), (verts[2], verts[4]))
        return [six] + chop(rot(pos6 + 6, n - 5))
    return chop(rot(pos6 + 4, n - 1))


def segment_cycle(seq: Sequence[int], copy_machine: Sequence[int], rng: Random) -> list[Segment]:
    """Cut a cycle into segments; every copy is a center w.p. at least 4/9."""
    n = len(seq)
    if n in (4, 6):
        choice: int | None = None
    elif n % 4 == 0 or n in (10, 14):
        choice = 0 if rng.random() < 0.5 else 1
    else:
        choice = 2 * rng.randrange(n // 2) + 1
    return cycle_segments(seq, copy_machine, choice)


def round_segments(
    copy_group: Sequence[int],
    segments: Sequence[Segment],
    uncovered: Sequence[int],
    candidates: Sequence[tuple[int, int]],
    rng: Random,
) -> list[int]:
    """One coin per segment (all jobs to the previous or all to the next copy);
    independent coins for jobs not covered by any segment."""
    sigma = [-1] * len(candidates)
    for seg in segments:
        before = rng.random() < 0.5
        v = seg.vertices
        for pos in range(1, len(v), 2):
            sigma[v[pos]] = copy_group[v[pos - 1 if before else pos + 1]]
    for j in uncovered:
        u1, u2 = candidates[j]
        sigma[j] = u1 if rng.random() < 0.5 else u2
    return sigma


@dataclass
class SNCTrace:
    """Intermediate random structures of one rounding run, for inspection."""

    candidates: list[tuple[int, int]]
    marked: set[Edge]
    pairings: dict[int, tuple[list[tuple[Edge, Edge]], Edge | None]]
    graph: SplitGraph
    segments: list[Segment]
    uncovered: list[int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "candidates": [list(c) for c in self.candidates],
                "marked": sorted(list(e) for e in self.marked),
                "pairings": {
                    str(u): {
                        "pairs": [[list(a), list(b)] for a, b in pairs],
                        "leftover": list(left) if left else None,
                    }
                    for u, (pairs, left) in self.pairings.items()
                },
                "copies": [
                    {"group": g, "edges": [list(e) for e in es]}
                    for g, es in zip(self.graph.copy_group, self.graph.copy_edges)
                ],
                "components": [{"kind": c.kind, "seq": list(c.seq)} for c in self.graph.components],
                "segments": [
                    {"vertices": list(s.vertices), "centers": list(s.centers), "from_cycle": s.from_cycle}
                    for s in self.segments
                ],
                "uncovered": self.uncovered,
            },
            indent=1,
        )


def snc_round(inp: SNCInput, rng: Random, want_trace: bool = False) -> tuple[list[int], SNCTrace | None]:
    """Run the full rounding; returns (job -> group, optional trace)."""
    candidates = [choose_candidates(inp, j, rng) for j in range(inp.n_jobs)]
    marked = mark_edges(inp, candidates, rng)
    pairings = pair_marked_edges(candidates, marked, rng)
    graph = build_split_graph(inp.machine_of, candidates, pairings)
    copy_machine = [inp.machine_of[u] for u in graph.copy_group]
    segments: list[Segment] = []
    for comp in graph.components:
        if comp.kind == "path":
            segments.extend(segment_path(comp.seq, rng))
        else:
            segments.extend(segment_cycle(comp.seq, copy_machine, rng))
    covered = {v for seg in segments for v in seg.vertices[1::2]}
    uncovered = [j for j in range(inp.n_jobs) if j not in covered]
    sigma = round_segments(graph.copy_group, segments, uncovered, candidates, rng)
    trace = SNCTrace(candidates, marked, pairings, graph, segments, uncovered) if want_trace else None
    return sigma, trace


def accumulate_statistics(
    inp: SNCInput, trials: int, seed: int
) -> tuple[dict[tuple[int, int], int], dict[tuple[int, int, int, int], int]]:
    """Monte-Carlo counts over independent roundings with per-trial seeds.

    Returns marginal counts keyed by (job, group) and joint counts keyed by
    (job, job', group, group') for every job pair j < j'.
    """
    marginal: dict[tuple[int, int], int] = {}
    joint: dict[tuple[int, int, int, int], int] = {}
    n = inp.n_jobs
    for t in range(trials):
        rng = Random(derive_seed(seed, t))
        sigma, _ = snc_round(inp, rng)
        for j in range(n):
            key = (j, sigma[j])
            marginal[key] = marginal.get(key, 0) + 1
            for j2 in range(j + 1, n):
                k2 = (j, j2, sigma[j], sigma[j2])
                joint[k2] = joint.get(k2, 0) + 1
    return marginal, joint
