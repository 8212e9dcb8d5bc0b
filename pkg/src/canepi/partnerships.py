"""Steady partnerships and the yearly schedule of sexual acts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .disease import Population, Stage
from .errors import ParameterError
from .netgen import EdgeSet
from .stochastics import DistributionSpec, RngStream


@dataclass
class PartnershipParams:
    p_form: float = 0.03
    duration: DistributionSpec = field(default_factory=lambda: DistributionSpec("DU", (1, 2)))
    steady_acts: DistributionSpec = field(default_factory=lambda: DistributionSpec("P", (30,)))
    pi_window_acts: DistributionSpec = field(default_factory=lambda: DistributionSpec("P", (8,)))
    pi_rest_acts: DistributionSpec = field(default_factory=lambda: DistributionSpec("P", (22,)))
    receptive_share: float = 0.5
    partners_from_neighbors: bool = True


@dataclass
class ActSchedule:
    """Serodiscordant contacts of one year, oriented source -> susceptible.

    ``receptive`` acts are those in which the susceptible partner is receptive
    (URAI for him).  Acts in the ``*_pi`` columns fall inside the source's
    primary-infection window and are priced at PI transmission levels.
    """

    source: np.ndarray
    target: np.ndarray
    steady: np.ndarray
    receptive: np.ndarray
    insertive: np.ndarray
    receptive_pi: np.ndarray
    insertive_pi: np.ndarray

    def __len__(self):
        return len(self.source)

    @property
    def total_acts(self) -> np.ndarray:
        return self.receptive + self.insertive + self.receptive_pi + self.insertive_pi

    @classmethod
    def concat(cls, parts) -> "ActSchedule":
        parts = list(parts)
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in cls.__dataclass_fields__))

    def rows(self):
        tags = np.where(self.steady, "steady", "casual")
        for k in range(len(self)):
            yield (int(self.source[k]), int(self.target[k]), int(self.receptive_pi[k] + self.receptive[k]),
                   int(self.insertive_pi[k] + self.insertive[k]), str(tags[k]))


def steady_pairs(pop: Population) -> np.ndarray:
    """Current partnerships as ``(i, j)`` rows with ``i < j``."""
    i = np.flatnonzero(pop.steady_partner > np.arange(pop.n))
    return np.column_stack([i, pop.steady_partner[i]]).astype(np.int64)


def form_and_dissolve_steady(pop: Population, edges: EdgeSet, p_form: float, rng: RngStream,
                             params: PartnershipParams = None, degrees=None) -> np.ndarray:
    """Age partnerships, end the expired ones, then let singles pair up.

    Singles are visited in random order; each, if still single, tries with
    probability ``p_form`` to pair with a uniformly chosen single neighbor.
    Returns the steady pairs in force afterwards.
    """
    if not 0.0 <= p_form <= 1.0:
        raise ParameterError(f"p_form must lie in [0, 1], got {p_form}")
    params = params or PartnershipParams()
    n = pop.n

    partnered = pop.steady_partner >= 0
    pop.steady_years_left[partnered] -= 1
    expired = np.flatnonzero(partnered & (pop.steady_years_left <= 0))
    pop.steady_partner[expired] = -1
    pop.steady_years_left[expired] = 0

    order = rng.permutation(n)
    tries = rng.random(n) < p_form
    pick = rng.random(n)
    durations = np.asarray(params.duration.sample(rng, n))

    candidates = order[tries[order] & (pop.steady_partner[order] < 0)].tolist()
    partner = pop.steady_partner.tolist()
    pick = pick.tolist()
    if params.partners_from_neighbors:
        indptr, indices = edges.neighbors(n)
        indptr = indptr.tolist()
        for i in candidates:
            if partner[i] >= 0:
                continue
            free = [j for j in indices[indptr[i]:indptr[i + 1]].tolist() if partner[j] < 0]
            if not free:
                continue
            j = free[int(pick[i] * len(free))]
            partner[i], partner[j] = j, i
            pop.steady_years_left[i] = pop.steady_years_left[j] = durations[i]
    else:
        if degrees is None:
            degrees = edges.degrees(n)
        active = np.flatnonzero(np.asarray(degrees) > 0).tolist()
        for i in candidates:
            if partner[i] >= 0 or degrees[i] == 0:
                continue
            free = [j for j in active if partner[j] < 0 and j != i]
            if not free:
                continue
            j = free[int(pick[i] * len(free))]
            partner[i], partner[j] = j, i
            pop.steady_years_left[i] = pop.steady_years_left[j] = durations[i]
    pop.steady_partner[:] = partner
    return steady_pairs(pop)


def _infectious(pop: Population, aids_active: bool) -> np.ndarray:
    mask = (pop.stage == Stage.PI) | (pop.stage == Stage.AP)
    if aids_active:
        mask |= pop.stage == Stage.AIDS
    return mask


def schedule_acts(pop: Population, edges: EdgeSet, rng: RngStream, params: PartnershipParams = None,
                  aids_active: bool = False, sources=None) -> ActSchedule:
    """Acts between infectious agents and susceptible contacts for one year.

    Steady pairs draw Poisson act counts; a source in primary infection splits
    them into a PI window and the rest of the year.  Casual edges carry one
    act.  Each act is receptive for the susceptible with probability
    ``receptive_share``.  Steady counts and casual roles are drawn per
    susceptible node and per edge so their number is independent of state.

    ``sources`` optionally restricts which infected agents may transmit.
    """
    params = params or PartnershipParams()
    n = pop.n
    gen = rng.generator
    steady_total = np.asarray(params.steady_acts.sample(rng, n))
    window = np.asarray(params.pi_window_acts.sample(rng, n))
    rest = np.asarray(params.pi_rest_acts.sample(rng, n))
    q = params.receptive_share
    steady_recv = gen.binomial(steady_total, q)
    window_recv = gen.binomial(window, q)
    rest_recv = gen.binomial(rest, q)
    casual_role = gen.random(len(edges)) < q

    infectious = _infectious(pop, aids_active)
    if sources is not None:
        allowed = np.zeros(n, dtype=bool)
        allowed[np.asarray(sources, dtype=np.int64)] = True
        infectious &= allowed
    susceptible = pop.stage == Stage.NEGATIVE

    partner = pop.steady_partner
    src = np.flatnonzero(infectious & (partner >= 0))
    src = src[susceptible[partner[src]]]
    tgt = partner[src]
    in_pi = pop.stage[src] == Stage.PI
    zeros = np.zeros(len(src), dtype=np.int64)
    steady_part = ActSchedule(
        source=src,
        target=tgt,
        steady=np.ones(len(src), dtype=bool),
        receptive=np.where(in_pi, rest_recv[tgt], steady_recv[tgt]),
        insertive=np.where(in_pi, rest[tgt] - rest_recv[tgt], steady_total[tgt] - steady_recv[tgt]),
        receptive_pi=np.where(in_pi, window_recv[tgt], zeros),
        insertive_pi=np.where(in_pi, window[tgt] - window_recv[tgt], zeros),
    )

    a, b = edges.pairs[:, 0], edges.pairs[:, 1]
    casual = ~edges.steady & (partner[a] != b)
    fwd = casual & infectious[a] & susceptible[b]
    bwd = casual & infectious[b] & susceptible[a]
    k = np.concatenate([np.flatnonzero(fwd), np.flatnonzero(bwd)])
    c_src = np.concatenate([a[fwd], b[bwd]])
    c_tgt = np.concatenate([b[fwd], a[bwd]])
    recv = casual_role[k].astype(np.int64)
    zeros = np.zeros(len(k), dtype=np.int64)
    casual_part = ActSchedule(
        source=c_src,
        target=c_tgt,
        steady=np.zeros(len(k), dtype=bool),
        receptive=recv,
        insertive=1 - recv,
        receptive_pi=zeros,
        insertive_pi=zeros,
    )
    return ActSchedule.concat([steady_part, casual_part])
