"""Scale-free contact network: degree sequences and configuration-model wiring.

Node degrees are fixed for the whole run; the partners behind those degrees
are redrawn every simulated year.  Wiring is stub matching followed by random
double-edge swaps that remove self-loops and multi-edges.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError, ParameterError
from .stochastics import RngStream, sample_power_law_degree

log = logging.getLogger(__name__)

CASUAL = 0
STEADY = 1
TAG_NAMES = {CASUAL: "casual", STEADY: "steady"}


@dataclass
class EdgeSet:
    """Undirected edges as an ``(E, 2)`` integer array plus a steady flag per edge."""

    pairs: np.ndarray
    steady: np.ndarray = None

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if self.steady is None:
            self.steady = np.zeros(len(self.pairs), dtype=bool)
        self.steady = np.asarray(self.steady, dtype=bool)
        if self.steady.shape != (len(self.pairs),):
            raise ParameterError("steady flags must match the number of edges")

    def __len__(self):
        return len(self.pairs)

    def degrees(self, n: int) -> np.ndarray:
        return np.bincount(self.pairs.ravel(), minlength=n)

    def neighbors(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """CSR adjacency ``(indptr, indices)``; neighbor lists are sorted."""
        src = np.concatenate([self.pairs[:, 0], self.pairs[:, 1]])
        dst = np.concatenate([self.pairs[:, 1], self.pairs[:, 0]])
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst[order]

    def with_steady(self, partner: np.ndarray) -> "EdgeSet":
        """Copy with an edge tagged steady exactly when its ends are partners."""
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        return EdgeSet(self.pairs, partner[i] == j)

    def rows(self):
        for (i, j), s in zip(self.pairs.tolist(), self.steady.tolist()):
            yield i, j, TAG_NAMES[STEADY if s else CASUAL]


@dataclass
class NetworkReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def generate_degree_sequence(n: int, gamma: float, k_max: int, p_zero: float, rng: RngStream,
                             max_attempts: int = 1000) -> np.ndarray:
    """Draw ``n`` i.i.d. power-law degrees and repair the parity of their sum.

    An odd total is fixed by adding one to a random node whose degree lies in
    ``[1, k_max - 1]``; if no such node exists the whole sequence is redrawn.
    """
    if n < 2:
        raise ParameterError(f"population size must be at least 2, got {n}")
    for _ in range(max_attempts):
        degrees = np.asarray(sample_power_law_degree(gamma, k_max, p_zero, rng, size=n), dtype=np.int64)
        if degrees.sum() % 2 == 0:
            return degrees
        candidates = np.flatnonzero((degrees >= 1) & (degrees <= k_max - 1))
        if len(candidates):
            degrees[candidates[rng.generator.integers(len(candidates))]] += 1
            return degrees
    raise GenerationError(f"no even degree sum after {max_attempts} draws")


def _edge_keys(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    return np.minimum(u, v) * n + np.maximum(u, v)


def _repair(u: list, v: list, bad: list, present: set, n: int, rng: RngStream, budget: int) -> bool:
    """Swap endpoints of illegal edges with random legal ones, in place.

    Edge ``e = (a, b)`` and a random legal edge ``f = (x, y)`` become
    ``(a, x)`` and ``(b, y)`` when both are new, non-loop edges.
    """
    n_edges = len(u)
    bad_set = set(bad)
    attempts = 0
    draws: list = []
    while bad:
        if attempts >= budget:
            return False
        if not draws:
            chunk = 4 * len(bad) + 64
            draws = list(zip(rng.generator.integers(n_edges, size=chunk).tolist(),
                             rng.generator.integers(2, size=chunk).tolist()))
        attempts += 1
        f, flip = draws.pop()
        if f in bad_set:
            continue
        e = bad[-1]
        a, b = u[e], v[e]
        x, y = (v[f], u[f]) if flip else (u[f], v[f])
        if a == x or b == y:
            continue
        k1 = min(a, x) * n + max(a, x)
        k2 = min(b, y) * n + max(b, y)
        if k1 == k2 or k1 in present or k2 in present:
            continue
        present.discard(min(x, y) * n + max(x, y))
        present.add(k1)
        present.add(k2)
        u[e], v[e] = a, x
        u[f], v[f] = b, y
        bad.pop()
        bad_set.discard(e)
    return True


def _match(degrees: np.ndarray, rng: RngStream, forbidden: set, max_restarts: int) -> np.ndarray:
    n = len(degrees)
    if degrees.sum() % 2:
        raise ParameterError("degree sum must be even")
    if np.any(degrees < 0):
        raise ParameterError("degrees must be non-negative")
    stubs = np.repeat(np.arange(n, dtype=np.int64), degrees)
    if len(stubs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    for _ in range(max_restarts):
        perm = rng.permutation(stubs)
        u, v = perm[0::2], perm[1::2]
        keys = _edge_keys(u, v, n)
        _, first = np.unique(keys, return_index=True)
        legal = np.zeros(len(keys), dtype=bool)
        legal[first] = True
        legal &= u != v
        if forbidden:
            legal &= ~np.isin(keys, np.fromiter(forbidden, dtype=np.int64))
        present = set(keys[legal].tolist()) | forbidden
        bad = np.flatnonzero(~legal).tolist()
        ul, vl = u.tolist(), v.tolist()
        if _repair(ul, vl, bad, present, n, rng, budget=100 * n):
            out = np.column_stack([ul, vl]).astype(np.int64)
            out.sort(axis=1)
            return out
    raise GenerationError(f"could not wire a simple graph after {max_restarts} matchings")


def wire_configuration_model(seq, rng: RngStream, max_restarts: int = 20) -> EdgeSet:
    """Random simple graph where node ``i`` has exactly ``seq[i]`` edges, all casual."""
    degrees = np.asarray(seq, dtype=np.int64)
    return EdgeSet(_match(degrees, rng, set(), max_restarts))


def annual_rewire(edges: EdgeSet, seq, steady_pairs, rng: RngStream, max_restarts: int = 10) -> EdgeSet:
    """Redraw all casual edges around the current steady partnerships.

    Each steady pair keeps its edge; its two members enter the casual matching
    with one stub fewer.  If the residual sequence cannot be wired the previous
    year's edges are kept.
    """
    degrees = np.asarray(seq, dtype=np.int64)
    n = len(degrees)
    steady = np.asarray(steady_pairs, dtype=np.int64).reshape(-1, 2)
    steady = np.sort(steady, axis=1)
    residual = degrees - np.bincount(steady.ravel(), minlength=n)
    if np.any(residual < 0):
        raise ParameterError("steady partnership on a node with degree 0")
    forbidden = set(_edge_keys(steady[:, 0], steady[:, 1], n).tolist())
    try:
        casual = _match(residual, rng, forbidden, max_restarts)
    except GenerationError:
        log.warning("residual wiring failed; keeping previous casual edges")
        partner = np.full(n, -1, dtype=np.int64)
        partner[steady[:, 0]] = steady[:, 1]
        partner[steady[:, 1]] = steady[:, 0]
        return edges.with_steady(partner)
    pairs = np.concatenate([steady, casual])
    flags = np.zeros(len(pairs), dtype=bool)
    flags[: len(steady)] = True
    return EdgeSet(pairs, flags)


def validate_network(edges: EdgeSet, seq) -> NetworkReport:
    """Check parity, loops, multi-edges, per-node degree and steady uniqueness."""
    degrees = np.asarray(seq, dtype=np.int64)
    n = len(degrees)
    report = NetworkReport()
    if degrees.sum() % 2:
        report.violations.append(f"parity: degree sum {int(degrees.sum())} is odd")
    pairs = edges.pairs
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= n):
        report.violations.append("node id out of range")
        return report
    for k in np.flatnonzero(pairs[:, 0] == pairs[:, 1]).tolist():
        report.violations.append(f"loop at node {int(pairs[k, 0])}")
    keys, counts = np.unique(_edge_keys(pairs[:, 0], pairs[:, 1], n), return_counts=True)
    for key in keys[counts > 1].tolist():
        report.violations.append(f"multi-edge between {key // n} and {key % n}")
    realized = edges.degrees(n)
    for i in np.flatnonzero(realized != degrees).tolist():
        report.violations.append(f"degree mismatch at node {i}: {int(realized[i])} edges, degree {int(degrees[i])}")
    steady_count = np.bincount(pairs[edges.steady].ravel(), minlength=n)
    for i in np.flatnonzero(steady_count > 1).tolist():
        report.violations.append(f"node {i} has {int(steady_count[i])} steady edges")
    return report
