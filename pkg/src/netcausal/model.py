"""Core data model for multisource network scenarios and correlation tables.

A scenario fixes the network skeleton: n agents, m independent hidden
sources, a sharing map telling which sources each agent reads, and the
input/output cardinalities.  A correlation table P(a|x) is stored densely
with shape (|a_1|, ..., |a_n|, |x_1|, ..., |x_n|); flattened in Fortran
order this gives the documented wire format (outputs fast, inputs slow,
agent 1 fastest, little-endian mixed radix).

Agents and sources are indexed 1-based throughout the public API, matching
the conventions of the causal-class notation {I_1, ..., I_n}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BadIndex, EmptySource, Mismatch, NonBinary, TooLarge

NORM_TOL = 1e-12
NS_TOL = 1e-9
MAX_DENSE_DIM = 10**6


@dataclass(frozen=True)
class Scenario:
    """Network skeleton: agents, sources, sharing map, cardinalities."""

    n_agents: int
    n_sources: int
    sharing: tuple[frozenset[int], ...]
    input_cards: tuple[int, ...]
    output_cards: tuple[int, ...]

    @property
    def dimension(self) -> int:
        """Length of the correlation vector: prod |a_i| * |x_i|."""
        d = 1
        for a, x in zip(self.output_cards, self.input_cards):
            d *= a * x
        return d

    @property
    def binary(self) -> bool:
        return all(c == 2 for c in self.input_cards + self.output_cards)

    def agents_of_source(self, j: int) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.n_agents + 1) if j in self.sharing[i - 1])

    def joint_inputs(self):
        """Iterate all joint input tuples, agent 1 fastest."""
        ranges = [range(c) for c in self.input_cards]
        for rev in itertools.product(*reversed(ranges)):
            yield tuple(reversed(rev))

    def joint_outputs(self):
        ranges = [range(c) for c in self.output_cards]
        for rev in itertools.product(*reversed(ranges)):
            yield tuple(reversed(rev))


@dataclass(frozen=True)
class CausalClass:
    """Parent-input sets {I_1, ..., I_n}: the inputs each output may read."""

    parent_inputs: tuple[frozenset[int], ...]

    @property
    def n_agents(self) -> int:
        return len(self.parent_inputs)

    @property
    def relaxation_count(self) -> int:
        """Total number L of input-to-output locality relaxations."""
        return sum(len(s) - 1 for s in self.parent_inputs)

    def label(self) -> str:
        return "|".join(
            "(" + ",".join(str(v) for v in sorted(s)) + ")" for s in self.parent_inputs
        )

    @staticmethod
    def parse(text: str, n_agents: int) -> "CausalClass":
        """Parse a label like "(1)|(2)|(1,2,3)" into a validated class."""
        parts = [p.strip() for p in text.split("|")]
        if len(parts) != n_agents:
            raise BadIndex(f"class label has {len(parts)} groups, expected {n_agents}")
        sets = []
        for p in parts:
            p = p.strip("()")
            members = frozenset(int(v) for v in p.split(",") if v.strip())
            sets.append(members)
        return make_causal_class(sets, n_agents)


def make_causal_class(parent_inputs, n_agents: int) -> CausalClass:
    sets = tuple(frozenset(s) for s in parent_inputs)
    if len(sets) != n_agents:
        raise BadIndex(f"need one parent set per agent, got {len(sets)}")
    for i, s in enumerate(sets, start=1):
        if i not in s:
            raise BadIndex(f"agent {i} must have its own input as a parent")
        for v in s:
            if not 1 <= v <= n_agents:
                raise BadIndex(f"parent input {v} outside [1, {n_agents}]")
    return CausalClass(sets)


def trivial_class(n_agents: int) -> CausalClass:
    """The unrelaxed network class {(1), (2), ..., (n)}."""
    return CausalClass(tuple(frozenset({i}) for i in range(1, n_agents + 1)))


def build_scenario(n, m, sharing, input_cards=None, output_cards=None) -> Scenario:
    """Validate and build a Scenario; cardinalities default to binary."""
    if n < 1 or m < 0:
        raise BadIndex("need at least one agent and a nonnegative source count")
    input_cards = tuple(input_cards) if input_cards is not None else (2,) * n
    output_cards = tuple(output_cards) if output_cards is not None else (2,) * n
    if len(input_cards) != n or len(output_cards) != n:
        raise Mismatch("cardinality lists must have one entry per agent")
    if any(c < 1 for c in input_cards + output_cards):
        raise BadIndex("cardinalities must be positive")
    share = tuple(frozenset(s) for s in sharing)
    if len(share) != n:
        raise Mismatch("sharing map must have one source set per agent")
    for i, s in enumerate(share, start=1):
        for j in s:
            if not 1 <= j <= m:
                raise BadIndex(f"agent {i} lists source {j} outside [1, {m}]")
    covered = frozenset().union(*share) if share else frozenset()
    for j in range(1, m + 1):
        if j not in covered:
            raise EmptySource(f"source {j} is not shared by any agent")
    scn = Scenario(n, m, share, input_cards, output_cards)
    if scn.dimension > MAX_DENSE_DIM:
        raise TooLarge(f"dense dimension {scn.dimension} exceeds {MAX_DENSE_DIM}")
    return scn


@dataclass(frozen=True)
class CorrelationTensor:
    """Dense table P(a|x), outputs first, validated on construction."""

    scenario: Scenario
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        scn = self.scenario
        shape = tuple(scn.output_cards) + tuple(scn.input_cards)
        arr = np.asarray(self.table, dtype=float)
        if arr.size != scn.dimension:
            raise Mismatch(f"table has {arr.size} entries, expected {scn.dimension}")
        arr = arr.reshape(shape)
        if arr.min() < -NORM_TOL:
            raise Mismatch(f"negative probability {arr.min():.3e}")
        out_axes = tuple(range(scn.n_agents))
        sums = arr.sum(axis=out_axes)
        if np.max(np.abs(sums - 1.0)) > NORM_TOL * scn.dimension:
            raise Mismatch("per-input normalization violated")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    def prob(self, outputs, inputs) -> float:
        return float(self.table[tuple(outputs) + tuple(inputs)])

    def flat(self) -> np.ndarray:
        """Wire-format vector: outputs fast, agent 1 fastest."""
        return self.table.reshape(-1, order="F")

    @staticmethod
    def from_flat(scenario: Scenario, values) -> "CorrelationTensor":
        arr = np.asarray(values, dtype=float)
        shape = tuple(scenario.output_cards) + tuple(scenario.input_cards)
        return CorrelationTensor(scenario, arr.reshape(shape, order="F"))


@dataclass(frozen=True)
class NsReport:
    max_violation: float
    violating_party: int | None
    tolerance: float
    passed: bool


def uniform_box(scenario: Scenario) -> CorrelationTensor:
    n_out = 1
    for c in scenario.output_cards:
        n_out *= c
    shape = tuple(scenario.output_cards) + tuple(scenario.input_cards)
    return CorrelationTensor(scenario, np.full(shape, 1.0 / n_out))


def deterministic_box(scenario: Scenario, assignments) -> CorrelationTensor:
    """Product box a_i = f_i(x_i) from per-agent maps (tuples over inputs)."""
    scn = scenario
    shape = tuple(scn.output_cards) + tuple(scn.input_cards)
    arr = np.zeros(shape)
    for x in scn.joint_inputs():
        outs = tuple(assignments[i][x[i]] for i in range(scn.n_agents))
        arr[outs + x] = 1.0
    return CorrelationTensor(scn, arr)


def mix(boxes, weights) -> CorrelationTensor:
    """Convex mixture of correlation tensors on a common scenario."""
    scn = boxes[0].scenario
    acc = np.zeros_like(boxes[0].table)
    for b, w in zip(boxes, weights):
        if b.scenario != scn:
            raise Mismatch("mixture components live on different scenarios")
        acc = acc + w * b.table
    return CorrelationTensor(scn, acc)


def check_nonsignaling(P: CorrelationTensor, tol: float = NS_TOL) -> NsReport:
    """Check P(a_-j | x) is independent of x_j for every agent j.

    The violation attributed to a party is the largest deviation seen in a
    single agent's output marginal when some other agent's input is flipped,
    which names the agent whose outcomes betray the foreign input.
    """
    scn = P.scenario
    n = scn.n_agents
    worst = 0.0
    party = None
    for j in range(n):
        marg = P.table.sum(axis=j)  # drop agent j's output axis
        x_axis = (n - 1) + j  # x_j axis in the reduced tensor
        spread = marg.max(axis=x_axis) - marg.min(axis=x_axis)
        v = float(spread.max())
        if v > worst:
            worst = v
            party = _attribute_party(P, j, n)
    return NsReport(worst, party if worst > tol else None, tol, worst <= tol)


def _attribute_party(P: CorrelationTensor, j: int, n: int) -> int:
    """Agent whose single-output marginal moves most under an x_j flip."""
    best_i, best_v = j + 1, -1.0
    for i in range(n):
        if i == j:
            continue
        axes = tuple(k for k in range(n) if k != i)
        single = P.table.sum(axis=axes)  # shape (|a_i|, |x_1|, ..., |x_n|)
        x_axis = 1 + j
        spread = float((single.max(axis=x_axis) - single.min(axis=x_axis)).max())
        if spread > best_v:
            best_v, best_i = spread, i + 1
    return best_i


def correlator(P: CorrelationTensor, x) -> float:
    """<a_1 ... a_n> at joint input x, outputs mapped 0 -> +1, 1 -> -1."""
    scn = P.scenario
    if any(c != 2 for c in scn.output_cards):
        raise NonBinary("correlators require dichotomic outputs")
    x = tuple(x)
    if len(x) != scn.n_agents:
        raise Mismatch("one input value per agent required")
    block = P.table[(Ellipsis,) + x]
    signs = _parity_signs(scn.n_agents)
    return float((block * signs).sum())


def _parity_signs(n: int) -> np.ndarray:
    signs = np.ones((2,) * n)
    for axis in range(n):
        idx = [slice(None)] * n
        idx[axis] = 1
        signs[tuple(idx)] *= -1.0
    return signs


def marginalize(P: CorrelationTensor, keep, fixed_inputs) -> CorrelationTensor:
    """Restrict to the kept agents with the dropped agents' inputs fixed.

    Sources shared only by dropped agents are removed from the sub-scenario;
    the remaining sources are renumbered in ascending order.
    """
    scn = P.scenario
    keep = sorted(set(keep))
    n = scn.n_agents
    for i in keep:
        if not 1 <= i <= n:
            raise BadIndex(f"kept agent {i} outside [1, {n}]")
    dropped = [i for i in range(1, n + 1) if i not in keep]
    for i in dropped:
        if i not in fixed_inputs:
            raise BadIndex(f"dropped agent {i} needs a fixed input")
        if not 0 <= fixed_inputs[i] < scn.input_cards[i - 1]:
            raise BadIndex(f"fixed input for agent {i} out of range")

    idx = [slice(None)] * (2 * n)
    for i in dropped:
        idx[n + i - 1] = fixed_inputs[i]
    sub = P.table[tuple(idx)]
    sub = sub.sum(axis=tuple(i - 1 for i in dropped))

    kept_sources = sorted(set().union(*(scn.sharing[i - 1] for i in keep)) if keep else set())
    renum = {j: r + 1 for r, j in enumerate(kept_sources)}
    sub_sharing = [
        frozenset(renum[j] for j in scn.sharing[i - 1] if j in renum) for i in keep
    ]
    sub_scn = build_scenario(
        len(keep),
        len(kept_sources),
        sub_sharing,
        [scn.input_cards[i - 1] for i in keep],
        [scn.output_cards[i - 1] for i in keep],
    )
    return CorrelationTensor(sub_scn, sub)


def independent_agents(scenario: Scenario) -> tuple[int, ...]:
    """A maximum set of agents that pairwise share no source.

    Ties are broken toward the lexicographically smallest agent tuple, so
    results are reproducible across runs.
    """
    n = scenario.n_agents
    best: tuple[int, ...] = ()
    for r in range(n, 0, -1):
        for combo in itertools.combinations(range(1, n + 1), r):
            ok = True
            for a, b in itertools.combinations(combo, 2):
                if scenario.sharing[a - 1] & scenario.sharing[b - 1]:
                    ok = False
                    break
            if ok:
                return combo
    return best
