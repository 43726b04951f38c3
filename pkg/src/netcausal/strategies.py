"""Deterministic response functions and the global strategy matrix.

Hidden-variable values double as strategy indices: each source value
lambda_j decodes (little-endian mixed radix, sharing agents ascending)
into one deterministic map per agent sharing that source, from the
agent's parent-input tuple to an output digit.  An agent reading several
sources combines its per-source digits by addition modulo the output
cardinality, which reduces to XOR for binary outputs and reproduces the
classical swapping logic of the middle node in an entanglement-swapping
chain.  With this decoding the per-source weight vectors mu_j are the
only free objects of the compatibility problem P = R mu.

The fully expressive cardinality for source j is

    prod_{i sharing j} |a_i| ^ (prod_{s in I_i} |x_s|)

capped at a configurable maximum; verdicts must always quote the
cardinality actually used, since truncation shrinks the reachable set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import Mismatch, Overflow
from .model import CausalClass, CorrelationTensor, Scenario

STRATEGY_GUARD = 2**32
DEFAULT_LAMBDA_CAP = 16


@dataclass(frozen=True)
class LocalResponse:
    """One agent's deterministic assignment (parent inputs, sources) -> output.

    ``table[input_index, source_index]`` holds the output digit; both
    indices are little-endian mixed radix over the sorted parent list and
    the sorted source list respectively.
    """

    agent: int
    parents: tuple[int, ...]
    sources: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    def output(self, input_index: int, source_index: int) -> int:
        return int(self.table[input_index, source_index])


@dataclass(frozen=True)
class SourceWeights:
    """Per-source probability vectors over {0, ..., |lambda_j| - 1}."""

    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = []
        for w in self.weights:
            w = np.asarray(w, dtype=float)
            if w.min() < -1e-12 or abs(w.sum() - 1.0) > 1e-9:
                raise Mismatch("source weights must be a probability vector")
            w = w.copy()
            w.setflags(write=False)
            ws.append(w)
        object.__setattr__(self, "weights", tuple(ws))

    def joint(self) -> np.ndarray:
        """Product distribution over joint source values, source 1 fastest."""
        out = self.weights[0]
        for w in self.weights[1:]:
            out = np.outer(w, out).reshape(-1)
        return out


@dataclass(frozen=True)
class StrategyMatrix:
    """Columns are global deterministic response vectors, one per joint value."""

    scenario: Scenario
    causal_class: CausalClass
    source_cards: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)
    truncated: bool = False

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    def column(self, joint_index: int) -> CorrelationTensor:
        return CorrelationTensor.from_flat(self.scenario, self.matrix[:, joint_index])

    def mix(self, weights: SourceWeights) -> CorrelationTensor:
        if tuple(len(w) for w in weights.weights) != tuple(self.source_cards):
            raise Mismatch("weight vector lengths must match source cardinalities")
        vec = self.matrix @ weights.joint()
        return CorrelationTensor.from_flat(self.scenario, vec)


def _mixed_radix(value: int, radices) -> tuple[int, ...]:
    digits = []
    for r in radices:
        digits.append(value % r)
        value //= r
    return tuple(digits)


def _flat_index(digits, radices) -> int:
    idx = 0
    mult = 1
    for d, r in zip(digits, radices):
        idx += d * mult
        mult *= r
    return idx


def _input_cells(scenario: Scenario, parents) -> list[tuple[int, ...]]:
    """Parent-input tuples in little-endian order (first parent fastest)."""
    ranges = [range(scenario.input_cards[p - 1]) for p in parents]
    cells = []
    for rev in itertools.product(*reversed(ranges)) if ranges else [()]:
        cells.append(tuple(reversed(rev)))
    return cells


def response_count(scenario: Scenario, cls: CausalClass, agent: int, source_cards) -> int:
    parents = sorted(cls.parent_inputs[agent - 1])
    n_cells = 1
    for p in parents:
        n_cells *= scenario.input_cards[p - 1]
    for j in sorted(scenario.sharing[agent - 1]):
        n_cells *= source_cards[j - 1]
    return scenario.output_cards[agent - 1] ** n_cells


def enumerate_local_responses(scenario: Scenario, cls: CausalClass, agent: int,
                              source_cards) -> list[LocalResponse]:
    """All deterministic responses for one agent, in lexicographic order."""
    source_cards = tuple(source_cards)
    count = response_count(scenario, cls, agent, source_cards)
    if count >= STRATEGY_GUARD:
        raise Overflow(f"agent {agent} has {count} responses, beyond the guard")
    parents = tuple(sorted(cls.parent_inputs[agent - 1]))
    sources = tuple(sorted(scenario.sharing[agent - 1]))
    n_in = len(_input_cells(scenario, parents))
    n_src = 1
    for j in sources:
        n_src *= source_cards[j - 1]
    card = scenario.output_cards[agent - 1]
    out = []
    for k in range(count):
        # last cell fastest so the flattened tables ascend lexicographically
        digits = _mixed_radix(k, [card] * (n_in * n_src))[::-1]
        table = np.array(digits, dtype=np.int64).reshape(n_in, n_src)
        table.setflags(write=False)
        out.append(LocalResponse(agent, parents, sources, table))
    return out


def fine_cardinality(scenario: Scenario, cls: CausalClass, source: int) -> int:
    """Fully expressive strategy count for one source (before capping)."""
    card = 1
    for i in scenario.agents_of_source(source):
        n_in = 1
        for p in sorted(cls.parent_inputs[i - 1]):
            n_in *= scenario.input_cards[p - 1]
        card *= scenario.output_cards[i - 1] ** n_in
    return card


def default_source_cards(scenario: Scenario, cls: CausalClass,
                         cap: int = DEFAULT_LAMBDA_CAP) -> tuple[int, ...]:
    return tuple(
        min(fine_cardinality(scenario, cls, j), cap)
        for j in range(1, scenario.n_sources + 1)
    )


def canonical_responses(scenario: Scenario, cls: CausalClass,
                        source_cards) -> list[LocalResponse]:
    """The strategy-index decoding described in the module docstring.

    Sourceless agents fall back to the constant-zero map.
    """
    source_cards = tuple(source_cards)
    if len(source_cards) != scenario.n_sources:
        raise Mismatch("one cardinality per source required")

    # component radix of (source j, agent i): number of parent-input maps
    def map_count(i: int) -> int:
        n_in = 1
        for p in sorted(cls.parent_inputs[i - 1]):
            n_in *= scenario.input_cards[p - 1]
        return scenario.output_cards[i - 1] ** n_in

    responses = []
    for agent in range(1, scenario.n_agents + 1):
        parents = tuple(sorted(cls.parent_inputs[agent - 1]))
        sources = tuple(sorted(scenario.sharing[agent - 1]))
        n_in = len(_input_cells(scenario, parents))
        out_card = scenario.output_cards[agent - 1]

        src_ranges = [range(source_cards[j - 1]) for j in sources]
        n_src = 1
        for j in sources:
            n_src *= source_cards[j - 1]
        table = np.zeros((n_in, max(n_src, 1)), dtype=np.int64)
        for flat_src, rev in enumerate(
            itertools.product(*reversed(src_ranges)) if src_ranges else [()]
        ):
            lam = tuple(reversed(rev))
            total = np.zeros(n_in, dtype=np.int64)
            for j, lam_j in zip(sources, lam):
                agents_j = scenario.agents_of_source(j)
                radices = [map_count(i) for i in agents_j]
                comps = _mixed_radix(lam_j, radices)
                g = comps[agents_j.index(agent)]
                total += np.array(_mixed_radix(g, [out_card] * n_in), dtype=np.int64)
            table[:, flat_src] = total % out_card
        table.setflags(write=False)
        responses.append(LocalResponse(agent, parents, sources, table))
    return responses


def global_strategy_column(scenario: Scenario, cls: CausalClass, responses,
                           joint_source_value, source_cards) -> CorrelationTensor:
    """Product response vector R_Lambda(a|x) at one joint source value."""
    if len(responses) != scenario.n_agents:
        raise Mismatch("one response per agent required")
    source_cards = tuple(source_cards)
    lam = tuple(joint_source_value)
    if len(lam) != scenario.n_sources:
        raise Mismatch("one value per source required")
    for r in responses:
        if tuple(sorted(cls.parent_inputs[r.agent - 1])) != tuple(r.parents):
            raise Mismatch("response parents disagree with the causal class")
        if tuple(sorted(scenario.sharing[r.agent - 1])) != tuple(r.sources):
            raise Mismatch("response sources disagree with the scenario")

    shape = tuple(scenario.output_cards) + tuple(scenario.input_cards)
    arr = np.zeros(shape)
    cells = {r.agent: _input_cells(scenario, r.parents) for r in responses}
    cell_ix = {a: {c: i for i, c in enumerate(cs)} for a, cs in cells.items()}
    for x in scenario.joint_inputs():
        outs = []
        for r in responses:
            ix = cell_ix[r.agent][tuple(x[p - 1] for p in r.parents)]
            i_src = _flat_index(
                [lam[j - 1] for j in r.sources], [source_cards[j - 1] for j in r.sources]
            )
            outs.append(r.output(ix, i_src))
        arr[tuple(outs) + x] = 1.0
    return CorrelationTensor(scenario, arr)


def build_strategy_matrix(scenario: Scenario, cls: CausalClass, source_cards,
                          responses=None) -> StrategyMatrix:
    """Assemble the d x (prod |lambda_j|) matrix of deterministic columns."""
    source_cards = tuple(source_cards)
    n_cols = 1
    for c in source_cards:
        n_cols *= c
    if n_cols >= STRATEGY_GUARD:
        raise Overflow(f"{n_cols} strategy columns exceed the guard")
    if responses is None:
        responses = canonical_responses(scenario, cls, source_cards)
    truncated = any(
        source_cards[j - 1] < fine_cardinality(scenario, cls, j)
        for j in range(1, scenario.n_sources + 1)
    )

    d = scenario.dimension
    inputs = list(scenario.joint_inputs())
    n_x = len(inputs)
    n_a = d // n_x
    out_cards = scenario.output_cards

    # joint source values, source 1 fastest
    full_ranges = [range(c) for c in source_cards]
    joints = [
        tuple(reversed(rev))
        for rev in (itertools.product(*reversed(full_ranges)) if full_ranges else [()])
    ]

    # per agent: (n_x, n_cols) matrix of output digits
    agent_out = []
    for r in responses:
        cells = _input_cells(scenario, r.parents)
        cell_index = {c: i for i, c in enumerate(cells)}
        rows = np.array(
            [cell_index[tuple(x[p - 1] for p in r.parents)] for x in inputs]
        )
        own_radices = [source_cards[j - 1] for j in r.sources]
        cols = np.array(
            [_flat_index([lam[j - 1] for j in r.sources], own_radices) for lam in joints],
            dtype=np.int64,
        )
        agent_out.append(r.table[np.ix_(rows, cols)])

    flat_out = np.zeros((n_x, len(joints)), dtype=np.int64)
    mult = 1
    for i in range(scenario.n_agents):
        flat_out += agent_out[i] * mult
        mult *= out_cards[i]

    matrix = np.zeros((d, len(joints)))
    x_flat = np.arange(n_x)
    for col in range(len(joints)):
        matrix[flat_out[:, col] + n_a * x_flat, col] = 1.0
    matrix.setflags(write=False)
    return StrategyMatrix(scenario, cls, source_cards, matrix, truncated)
