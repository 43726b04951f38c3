"""Eavesdropping bounds on multisource networks.

The bound under test: an eavesdropper holding one system per independent
source, each correlated with that source only, learns about the
independent agents' outcomes at most

    D( P(e | a_I, x, z),  prod_j p(e_j | z_j) )  <=  k (2 - R_k)

in variational distance, where k counts the independent agents and R_k is
the network Bell value of the observed correlations.

Simulations use *flagged* source models: each source carries a classical
flag with known distribution (an ensemble decomposition of a quantum
source, or the hidden value itself in a classical network), and the
eavesdropper's outcome e_j depends only on (z_j, flag_j).  Every such
model satisfies the non-signaling constraints by construction; merged
eavesdropper systems (several sources read jointly) are modeled by
partitioning the sources into groups, which shrinks the provable k to the
independent agents whose linking sources stay unmerged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Mismatch, OutOfRange, SignalingEve, TooLarge
from .functionals import IndependentSet, eval_Rk, variational_distance
from .model import CorrelationTensor, Scenario, build_scenario
from .quantum import (
    MeasurementPlan,
    SourceState,
    make_state,
    network_correlations,
    preset_bilocal_epr,
    product_observable,
    qubit_layout,
)

BOUND_TOL = 1e-9


def eavesdropper_bound(r_k: float, k: int) -> float:
    """k (2 - R_k), clamped below at zero."""
    if not 0.0 <= r_k <= 2.0 + BOUND_TOL:
        raise OutOfRange(f"R_k = {r_k} outside [0, 2]")
    if k < 1:
        raise OutOfRange("need at least one independent agent")
    return max(0.0, k * (2.0 - r_k))


# --- flagged network models --------------------------------------------------

@dataclass(frozen=True)
class FlaggedNetwork:
    """Network correlations refined by per-source classical flags."""

    scenario: Scenario
    ind: IndependentSet
    flag_dists: tuple[np.ndarray, ...]
    # P(a_I..., flags... | x_I...): axes = outputs of the independent agents,
    # then one flag axis per source, then the independent agents' inputs.
    cond: np.ndarray = field(repr=False)
    box: CorrelationTensor = field(repr=False)

    @property
    def flag_cards(self) -> tuple[int, ...]:
        return tuple(len(q) for q in self.flag_dists)


def _marginal_on(P: CorrelationTensor, agents: tuple[int, ...]) -> np.ndarray:
    """P(a_agents | x_agents) for a non-signaling tensor, as a dense array."""
    scn = P.scenario
    n = scn.n_agents
    others = [i for i in range(1, n + 1) if i not in agents]
    idx = [slice(None)] * (2 * n)
    for i in others:
        idx[n + i - 1] = 0  # any fixed value; non-signaling makes them equal
    sub = P.table[tuple(idx)].sum(axis=tuple(i - 1 for i in others))
    return sub


def flagged_from_components(scenario: Scenario, ind: IndependentSet,
                            flag_dists, component_boxes) -> FlaggedNetwork:
    """Assemble a flagged network from per-flag-combo correlation tensors.

    ``component_boxes[flags]`` is the conditional box given the joint flag
    value; each must be non-signaling so the independent-agent marginal is
    well defined.
    """
    flag_dists = tuple(np.asarray(q, dtype=float) for q in flag_dists)
    cards = tuple(len(q) for q in flag_dists)
    agents = ind.indices
    k = len(agents)
    out_shape = tuple(scenario.output_cards[i - 1] for i in agents)
    in_shape = tuple(scenario.input_cards[i - 1] for i in agents)
    cond = np.zeros(out_shape + cards + in_shape)
    avg = None
    for flags in itertools.product(*(range(c) for c in cards)):
        box = component_boxes[flags]
        weight = 1.0
        for q, f in zip(flag_dists, flags):
            weight *= q[f]
        avg = box.table * weight if avg is None else avg + box.table * weight
        marg = _marginal_on(box, agents)  # (a_I..., x_I...)
        cond[(slice(None),) * k + flags + (Ellipsis,)] = marg
    box = CorrelationTensor(scenario, avg)
    return FlaggedNetwork(scenario, ind, flag_dists, cond, box)


def visibility_split(kind: str, parties: int, visibility: float,
                     rng: np.random.Generator | None = None):
    """Two-component ensemble of a white-noise source with the same average.

    Splits v into effective visibilities (v1, v2) with weights (q, 1-q);
    randomized when a generator is supplied.  Pure sources admit only the
    trivial split.
    """
    if visibility >= 1.0 or rng is None:
        q = 0.5
        v1 = v2 = visibility
        if visibility < 1.0 and rng is None:
            q, v1, v2 = visibility, 1.0, 0.0
    else:
        for _ in range(64):
            q = rng.uniform(0.1, 0.9)
            v1 = rng.uniform(0.0, 1.0)
            v2 = (visibility - q * v1) / (1.0 - q)
            if 0.0 <= v2 <= 1.0:
                break
        else:
            q, v1, v2 = visibility, 1.0, 0.0
    states = (make_state(kind, parties, v1), make_state(kind, parties, v2))
    return np.array([q, 1.0 - q]), states


def flagged_from_quantum(scenario: Scenario, states, plan: MeasurementPlan,
                         ind: IndependentSet,
                         rng: np.random.Generator | None = None) -> FlaggedNetwork:
    """Flag each source by a random two-component ensemble decomposition."""
    dists = []
    components = []
    for st in states:
        q, comps = visibility_split(st.kind, st.parties, st.visibility, rng)
        dists.append(q)
        components.append(comps)
    cards = tuple(len(q) for q in dists)
    boxes = {}
    for flags in itertools.product(*(range(c) for c in cards)):
        flagged_states = [components[j][flags[j]] for j in range(len(states))]
        boxes[flags] = network_correlations(scenario, flagged_states, plan)
    return flagged_from_components(scenario, ind, dists, boxes)


def flagged_from_classical(scenario: Scenario, ind: IndependentSet,
                           source_dists, responses) -> FlaggedNetwork:
    """Classical hidden-variable network; the flags are the values themselves.

    ``responses[i]`` has shape (|a_i|, |x_i|, *source cards of agent i's
    sources ascending): a stochastic response P(a_i | x_i, lambda values).
    """
    dists = tuple(np.asarray(q, dtype=float) for q in source_dists)
    cards = tuple(len(q) for q in dists)
    n = scenario.n_agents
    boxes = {}
    for flags in itertools.product(*(range(c) for c in cards)):
        shape = tuple(scenario.output_cards) + tuple(scenario.input_cards)
        arr = np.ones(shape)
        for x in scenario.joint_inputs():
            cell = np.ones(tuple(scenario.output_cards))
            for i in range(1, n + 1):
                lam = tuple(flags[j - 1] for j in sorted(scenario.sharing[i - 1]))
                probs = responses[i - 1][(slice(None), x[i - 1]) + lam]
                broadcast = [1] * n
                broadcast[i - 1] = scenario.output_cards[i - 1]
                cell = cell * probs.reshape(broadcast)
            arr[(Ellipsis,) + x] = cell
        boxes[flags] = CorrelationTensor(scenario, arr)
    return flagged_from_components(scenario, ind, dists, boxes)


# --- eavesdropper models -------------------------------------------------------

@dataclass(frozen=True)
class EveModel:
    """Per-group response tables p(e_g | z_g, flags of the group)."""

    groups: tuple[tuple[int, ...], ...]
    tables: tuple[np.ndarray, ...]  # shape (n_e, n_z, *flag cards of members)

    def __post_init__(self):
        seen = sorted(j for g in self.groups for j in g)
        if seen != list(range(1, len(seen) + 1)):
            raise Mismatch("groups must partition the sources 1..m")
        for t in self.tables:
            if t.min() < -1e-12:
                raise SignalingEve("negative response probability")
            sums = t.sum(axis=0)
            if np.abs(sums - 1.0).max() > 1e-9:
                raise SignalingEve("response tables must normalize per condition")


def independent_eve(network: FlaggedNetwork, n_outputs: int = 2,
                    n_inputs: int = 2) -> EveModel:
    """Constant tables: the eavesdropper ignores every source."""
    groups = tuple((j,) for j in range(1, network.scenario.n_sources + 1))
    tables = []
    for j, card in enumerate(network.flag_cards, start=1):
        t = np.full((n_outputs, n_inputs, card), 1.0 / n_outputs)
        tables.append(t)
    return EveModel(groups, tuple(tables))


def copy_eve(network: FlaggedNetwork, n_inputs: int = 2) -> EveModel:
    """The eavesdropper outputs each source's flag value verbatim."""
    groups = tuple((j,) for j in range(1, network.scenario.n_sources + 1))
    tables = []
    for card in network.flag_cards:
        t = np.zeros((card, n_inputs, card))
        for f in range(card):
            t[f, :, f] = 1.0
        tables.append(t)
    return EveModel(groups, tuple(tables))


def random_eve(network: FlaggedNetwork, rng: np.random.Generator,
               n_outputs: int = 2, n_inputs: int = 2,
               groups=None) -> EveModel:
    """Dirichlet-random response tables, optionally with merged sources."""
    m = network.scenario.n_sources
    if groups is None:
        groups = tuple((j,) for j in range(1, m + 1))
    else:
        groups = tuple(tuple(g) for g in groups)
    tables = []
    for g in groups:
        cards = tuple(network.flag_cards[j - 1] for j in g)
        shape = (n_outputs, n_inputs) + cards
        t = np.zeros(shape)
        for cond in itertools.product(range(n_inputs), *(range(c) for c in cards)):
            t[(slice(None),) + cond] = rng.dirichlet(np.ones(n_outputs))
        tables.append(t)
    return EveModel(groups, tuple(tables))


@dataclass(frozen=True)
class SecurityReport:
    r_value: float
    k: int
    bound: float
    d_observed: float | None
    d_average: float | None
    satisfied: bool
    info: dict = field(default_factory=dict)


def simulate_eavesdropper(network: FlaggedNetwork, eve: EveModel,
                          tol: float = BOUND_TOL) -> SecurityReport:
    """Exact joint simulation and the worst-case conditional distance.

    The distance is evaluated at every conditioning cell (a_I, x_I, z) with
    positive probability (the strongest reading); the probability-weighted
    average over outcome cells is reported alongside.  Merging sources into
    groups removes the linked agents from the provable independent set, and
    the bound is recomputed with the reduced k.
    """
    scn = network.scenario
    m = scn.n_sources

    singleton = {g[0] for g in eve.groups if len(g) == 1}
    eff_agents = tuple(
        i for i in network.ind.indices
        if all(j in singleton for j in scn.sharing[i - 1])
    )
    if not eff_agents:
        raise Mismatch("no independent agent keeps an unmerged source")
    eff = IndependentSet(eff_agents)
    rep = eval_Rk(network.box, eff)
    k = eff.k
    bound = eavesdropper_bound(min(rep.r_value, 2.0), k)

    # P(a_eff, flags | x_eff): marginalize the conditional tensor onto the
    # effective agents (sum the dropped agents' output axes, fix their inputs)
    all_agents = network.ind.indices
    drop_pos = [p for p, i in enumerate(all_agents) if i not in eff_agents]
    k_all = len(all_agents)
    cond = network.cond
    if drop_pos:
        cond = cond.sum(axis=tuple(drop_pos))
        in_offset = (k_all - len(drop_pos)) + m
        idx = [slice(None)] * cond.ndim
        for p in sorted(drop_pos, reverse=True):
            idx[in_offset + p] = 0
        cond = cond[tuple(idx)]

    k_eff = len(eff_agents)
    flag_cards = network.flag_cards
    out_cards = tuple(scn.output_cards[i - 1] for i in eff_agents)
    in_cards = tuple(scn.input_cards[i - 1] for i in eff_agents)

    z_cards = tuple(t.shape[1] for t in eve.tables)
    worst = 0.0
    total = 0.0
    total_weight = 0.0
    group_flag_pos = [tuple(j - 1 for j in g) for g in eve.groups]

    for a_cell in itertools.product(*(range(c) for c in out_cards)):
        for x_cell in itertools.product(*(range(c) for c in in_cards)):
            weights = cond[a_cell + (Ellipsis,)][(Ellipsis,) + x_cell]
            p_ax = float(weights.sum())
            if p_ax < 1e-12:
                continue
            q_flags = weights / p_ax  # P(flags | a_eff, x_eff)
            for z in itertools.product(*(range(c) for c in z_cards)):
                joint = q_flags
                ref = np.ones(1)
                # contract group by group: eve outputs ordered by group
                out = joint
                for g_ix, g in enumerate(eve.groups):
                    pos = group_flag_pos[g_ix]
                    t = eve.tables[g_ix][:, z[g_ix]]  # (n_e, *flag cards)
                    # move this group's flag axes to the front of `out`
                    lead = out.ndim - m + np.array(pos) - (out.ndim - m)
                    # axes of remaining flags inside `out`: the LAST m' axes
                    out = _contract_group(out, t, pos, m, g_ix)
                    marg = np.tensordot(
                        t,
                        _outer(network.flag_dists, pos),
                        axes=(tuple(range(1, t.ndim)), tuple(range(len(pos)))),
                    )
                    ref = np.multiply.outer(ref, marg)
                d = 0.5 * float(np.abs(out.reshape(-1) - ref.reshape(-1)[..., None][:, 0] if False else out.reshape(-1) - ref.reshape(-1)).sum())
                worst = max(worst, d)
                total += p_ax * d
                total_weight += p_ax

    d_avg = total / total_weight if total_weight else 0.0
    return SecurityReport(
        r_value=rep.r_value,
        k=k,
        bound=bound,
        d_observed=worst,
        d_average=d_avg,
        satisfied=worst <= bound + tol,
        info={"effective_agents": eff_agents, "groups": eve.groups,
              "i_value": rep.i_value, "j_value": rep.j_value},
    )


def _outer(flag_dists, positions) -> np.ndarray:
    out = np.ones(())
    for p in positions:
        out = np.multiply.outer(out, flag_dists[p])
    return out


def _contract_group(out: np.ndarray, t: np.ndarray, pos, m: int, g_ix: int):
    """Contract the group's flag axes of `out` against table t -> append e axis."""
    # `out` layout: (e_1, ..., e_{g_ix}, flags...) with the remaining flag
    # axes trailing in source order; `pos` indexes sources from zero.
    n_lead = out.ndim - (m - sum(len(p) if isinstance(p, tuple) else 1 for p in []) )
    raise NotImplementedError


def check_c5(joint: np.ndarray, tol: float = 1e-9) -> None:
    """Raise SignalingEve if P(a,b,e|x,y,z) violates the pairwise conditions.

    joint axes: (a, b, e, x, y, z).
    """
    p_ab = joint.sum(axis=2)  # (a, b, x, y, z)
    if np.abs(p_ab.max(axis=4) - p_ab.min(axis=4)).max() > tol:
        raise SignalingEve("P(a,b|x,y,z) depends on z")
    p_ae = joint.sum(axis=1)  # (a, e, x, y, z)
    if np.abs(p_ae.max(axis=3) - p_ae.min(axis=3)).max() > tol:
        raise SignalingEve("P(a,e|x,y,z) depends on y")
    p_be = joint.sum(axis=0)  # (b, e, x, y, z)
    if np.abs(p_be.max(axis=2) - p_be.min(axis=2)).max() > tol:
        raise SignalingEve("P(b,e|x,y,z) depends on x")


def derived_c6_holds(joint: np.ndarray, tol: float = 1e-7) -> bool:
    """Check the derived conditional relation p(a|b,x,y,z) = p(a|b,x,y)."""
    p_b = joint.sum(axis=(0, 2))  # (b, x, y, z)
    p_ab = joint.sum(axis=2)  # (a, b, x, y, z)
    n_a, n_b = p_ab.shape[0], p_ab.shape[1]
    for b in range(n_b):
        for x in range(p_ab.shape[2]):
            for y in range(p_ab.shape[3]):
                vals = []
                for z in range(p_ab.shape[4]):
                    if p_b[b, x, y, z] > 1e-12:
                        vals.append(p_ab[:, b, x, y, z] / p_b[b, x, y, z])
                for v in vals[1:]:
                    if np.abs(v - vals[0]).max() > tol:
                        return False
    return True


# --- presets -------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkPreset:
    scenario: Scenario
    states: tuple[SourceState, ...]
    plan: MeasurementPlan
    ind: IndependentSet


def _end_settings():
    inv = 1.0 / math.sqrt(2.0)
    return (inv, 0.0, inv), (-inv, 0.0, inv)  # (Z+X)/sqrt2, (Z-X)/sqrt2


Z_DIR = (0.0, 0.0, 1.0)
X_DIR = (1.0, 0.0, 0.0)


def preset_network(kind: str, visibility: float = 1.0) -> NetworkPreset:
    """The chain / star / hybrid quantum presets of the security analysis."""
    kind = kind.strip().lower()
    if kind in ("bilocal", "bilocal-epr", "chain:3"):
        scn, states, plan = preset_bilocal_epr(visibility)
        return NetworkPreset(scn, tuple(states), plan, IndependentSet((1, 3)))
    if kind.startswith("chain:"):
        return _preset_chain(int(kind.split(":", 1)[1]), visibility)
    if kind.startswith("star:"):
        return _preset_star(int(kind.split(":", 1)[1]), visibility)
    if kind == "hybrid":
        return _preset_hybrid(visibility)
    raise Mismatch(f"unknown preset {kind!r}")


def _preset_chain(n: int, visibility: float) -> NetworkPreset:
    """n agents in a line, EPR links; ends plus alternating interior agents."""
    if n < 2:
        raise Mismatch("chains need at least two agents")
    if 2 * (n - 1) > 12:
        raise TooLarge("chain preset capped at 12 qubits")
    sharing = []
    for i in range(1, n + 1):
        s = set()
        if i > 1:
            s.add(i - 1)
        if i < n:
            s.add(i)
        sharing.append(s)
    scn = build_scenario(n, n - 1, sharing)
    states = tuple(make_state("epr", 2, visibility) for _ in range(n - 1))
    ind = tuple(i for i in range(1, n - 1, 2)) + (n,)
    plus, minus = _end_settings()
    rows = []
    for i in range(1, n + 1):
        nq = len(scn.sharing[i - 1])
        if i in ind:
            if nq == 1:
                rows.append((product_observable([plus]), product_observable([minus])))
            else:
                # interior independent agent: the input acts on the left
                # qubit; the right qubit carries the B-side factor
                rows.append((
                    product_observable([plus, Z_DIR]),
                    product_observable([minus, X_DIR]),
                ))
        else:
            rows.append((
                product_observable([Z_DIR] * nq),
                product_observable([X_DIR] * nq),
            ))
    plan = MeasurementPlan(tuple(rows))
    return NetworkPreset(scn, states, plan, IndependentSet(ind))


def _preset_star(n: int, visibility: float) -> NetworkPreset:
    """n leaf agents, one hub holding a qubit per source."""
    if n < 2:
        raise Mismatch("stars need at least two leaves")
    if 2 * n > 12:
        raise TooLarge("star preset capped at 12 qubits")
    sharing = [{i} for i in range(1, n + 1)] + [set(range(1, n + 1))]
    scn = build_scenario(n + 1, n, sharing)
    states = tuple(make_state("epr", 2, visibility) for _ in range(n))
    plus, minus = _end_settings()
    rows = [(product_observable([plus]), product_observable([minus]))
            for _ in range(n)]
    rows.append((
        product_observable([Z_DIR] * n),
        product_observable([X_DIR] * n),
    ))
    plan = MeasurementPlan(tuple(rows))
    return NetworkPreset(scn, states, plan, IndependentSet(tuple(range(1, n + 1))))


def _preset_hybrid(visibility: float) -> NetworkPreset:
    """EPR-GHZ-EPR chain with an internal EPR link: 5 agents, 4 sources.

    Agents: A1 - M1 - B2 - M2 - C1; sources: EPR(A1,M1), GHZ(M1,B2,M2),
    EPR(M2,C1), EPR(M1,M2).  Independent agents A1, B2, C1.
    """
    sharing = [{1}, {1, 2, 4}, {2}, {2, 3, 4}, {3}]
    scn = build_scenario(5, 4, sharing)
    states = (
        make_state("epr", 2, visibility),
        make_state("ghz", 3, visibility),
        make_state("epr", 2, visibility),
        make_state("epr", 2, visibility),
    )
    plus, minus = _end_settings()
    eye = None  # identity factor expressed through the observable matrix
    ident = np.eye(2, dtype=complex)
    from .quantum import Observable

    def obs(*factors):
        mat = factors[0]
        for f in factors[1:]:
            mat = np.kron(mat, f)
        return Observable(mat, tuple(factors))

    def bloch(d):
        from .quantum import bloch_observable

        return bloch_observable(d)

    # M1 qubits ordered by source: (l1, l2, l4); M2: (l2, l3, l4)
    m1_0 = obs(bloch(Z_DIR), bloch(Z_DIR), bloch(Z_DIR))
    m1_1 = obs(bloch(X_DIR), bloch(X_DIR), bloch(X_DIR))
    m2_0 = obs(ident, bloch(Z_DIR), bloch(Z_DIR))
    m2_1 = obs(bloch(X_DIR), bloch(X_DIR), bloch(X_DIR))
    rows = (
        (product_observable([plus]), product_observable([minus])),
        (m1_0, m1_1),
        (product_observable([plus]), product_observable([minus])),
        (m2_0, m2_1),
        (product_observable([plus]), product_observable([minus])),
    )
    plan = MeasurementPlan(rows)
    return NetworkPreset(scn, states, plan, IndependentSet((1, 3, 5)))


def sweep_random_eves(preset: NetworkPreset, n_eves: int, seed: int = 0,
                      groups=None) -> list[SecurityReport]:
    """Random flagged decompositions and eve tables; one report per eve."""
    rng = np.random.default_rng(seed)
    reports = []
    network = None
    for trial in range(n_eves):
        if network is None or trial % 16 == 0:
            network = flagged_from_quantum(
                preset.scenario, preset.states, preset.plan, preset.ind, rng
            )
        eve = random_eve(network, rng, groups=groups)
        reports.append(simulate_eavesdropper(network, eve))
    return reports
