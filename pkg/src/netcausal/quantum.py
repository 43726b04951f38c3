"""Small dense quantum simulator for network correlation tensors.

Sources distribute one qubit to every agent that shares them (an EPR pair
for two agents, a GHZ state for three or more).  White noise at
visibility v replaces the pure state rho by v*rho + (1-v)*I/dim.  Agents
measure dichotomic observables on the qubits they hold; observables may
carry a declared per-qubit product form, which is what makes the
network functionals factorize source by source.

Qubit bookkeeping is source-major: source 1's qubits come first, ordered
by sharing agent ascending; an agent's local qubits are ordered by source
index ascending.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from .errors import BadVisibility, InconsistentPlan, Mismatch, TooLarge
from .model import CorrelationTensor, Scenario

MAX_QUBITS = 16
UNITARITY_TOL = 1e-10
EIGENVALUE_SNAP = 1e-8

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class SourceState:
    """Density operator distributed by one source, plus its provenance."""

    kind: str
    parties: int
    visibility: float
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        dim = 2**self.parties
        if rho.shape != (dim, dim):
            raise Mismatch(f"state for {self.parties} qubits needs dim {dim}")
        if np.abs(rho - rho.conj().T).max() > 1e-10:
            raise Mismatch("density operator must be Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise Mismatch("density operator must have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise Mismatch("density operator must be positive semidefinite")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)


def _pure(vec: np.ndarray) -> np.ndarray:
    vec = vec / np.linalg.norm(vec)
    return np.outer(vec, vec.conj())


def make_state(kind: str, parties: int = 2, visibility: float = 1.0) -> SourceState:
    """EPR or GHZ source, optionally mixed with white noise."""
    if not 0.0 <= visibility <= 1.0:
        raise BadVisibility(f"visibility {visibility} outside [0, 1]")
    kind = kind.lower()
    if kind == "epr":
        parties = 2
        vec = np.zeros(4, dtype=complex)
        vec[0b00] = vec[0b11] = 1.0
    elif kind == "ghz":
        if parties < 2:
            raise Mismatch("GHZ needs at least two parties")
        vec = np.zeros(2**parties, dtype=complex)
        vec[0] = vec[-1] = 1.0
    else:
        raise Mismatch(f"unknown source kind {kind!r}")
    dim = 2**parties
    rho = _pure(vec)
    if visibility < 1.0:
        rho = visibility * rho + (1.0 - visibility) * np.eye(dim) / dim
    return SourceState(kind, parties, visibility, rho)


@dataclass(frozen=True)
class Observable:
    """Dichotomic observable, optionally with a declared per-qubit product form."""

    matrix: np.ndarray = field(repr=False)
    factors: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise Mismatch("observable must be a square matrix")
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise Mismatch("observable must be Hermitian")
        if np.abs(m @ m - np.eye(m.shape[0])).max() > UNITARITY_TOL:
            raise Mismatch("observable must square to the identity")
        eigs = np.linalg.eigvalsh(m)
        if np.abs(np.abs(eigs) - 1.0).max() > EIGENVALUE_SNAP:
            raise Mismatch("observable eigenvalues must snap to +/-1")
        if self.factors is not None:
            fs = tuple(np.asarray(f, dtype=complex) for f in self.factors)
            prod = fs[0]
            for f in fs[1:]:
                prod = np.kron(prod, f)
            if prod.shape != m.shape or np.abs(prod - m).max() > 1e-9:
                raise Mismatch("declared factors do not multiply to the observable")
            object.__setattr__(self, "factors", fs)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenprojectors for outcomes 0 (+1) and 1 (-1)."""
        eye = np.eye(self.matrix.shape[0])
        return (eye + self.matrix) / 2.0, (eye - self.matrix) / 2.0


def bloch_observable(direction) -> np.ndarray:
    """Single-qubit observable n . sigma for a unit 3-vector n."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    return n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z


def product_observable(directions) -> Observable:
    """Separable observable from one Bloch direction per qubit."""
    factors = [bloch_observable(d) for d in directions]
    m = factors[0]
    for f in factors[1:]:
        m = np.kron(m, f)
    return Observable(m, tuple(factors))


@dataclass(frozen=True)
class MeasurementPlan:
    """Per agent, per input value: the observable on that agent's qubits."""

    assignments: tuple[tuple[Observable, ...], ...]

    def observable(self, agent: int, x: int) -> Observable:
        return self.assignments[agent - 1][x]

    @property
    def separable(self) -> bool:
        return all(o.factors is not None for row in self.assignments for o in row)


def qubit_layout(scenario: Scenario):
    """(source, agent) -> global qubit index, plus per-agent qubit lists."""
    index = {}
    q = 0
    for j in range(1, scenario.n_sources + 1):
        for i in scenario.agents_of_source(j):
            index[(j, i)] = q
            q += 1
    agent_qubits = {
        i: [index[(j, i)] for j in sorted(scenario.sharing[i - 1])]
        for i in range(1, scenario.n_agents + 1)
    }
    return index, agent_qubits, q


def _validate_network(scenario: Scenario, states, plan: MeasurementPlan):
    if len(states) != scenario.n_sources:
        raise InconsistentPlan("one source state per source required")
    for j, st in enumerate(states, start=1):
        expect = len(scenario.agents_of_source(j))
        if st.parties != expect:
            raise InconsistentPlan(
                f"source {j} feeds {expect} agents but its state has {st.parties}"
            )
    if len(plan.assignments) != scenario.n_agents:
        raise InconsistentPlan("one observable row per agent required")
    _, agent_qubits, q = qubit_layout(scenario)
    if q > MAX_QUBITS:
        raise TooLarge(f"{q} qubits exceed the cap of {MAX_QUBITS}")
    for i in range(1, scenario.n_agents + 1):
        row = plan.assignments[i - 1]
        if len(row) != scenario.input_cards[i - 1]:
            raise InconsistentPlan(f"agent {i} needs one observable per input")
        if scenario.output_cards[i - 1] != 2:
            raise InconsistentPlan("quantum outputs are dichotomic")
        for obs in row:
            if obs.n_qubits != len(agent_qubits[i]):
                raise InconsistentPlan(
                    f"agent {i} holds {len(agent_qubits[i])} qubits, observable "
                    f"acts on {obs.n_qubits}"
                )
    return agent_qubits, q


def _rho_tensor(states, q: int) -> np.ndarray:
    rho = states[0].rho
    for st in states[1:]:
        rho = np.kron(rho, st.rho)
    return rho.reshape((2,) * (2 * q))


def _contract(rho_t: np.ndarray, q: int, agent_tensors):
    """einsum of rho (2q axes) against per-agent operator tensors.

    Each agent tensor has an optional leading outcome axis followed by row
    axes and column axes over its qubits.  Tr[M rho]: M's column index
    pairs with rho's row index and vice versa.
    """
    letters = string.ascii_letters
    row = {k: letters[k] for k in range(q)}
    col = {k: letters[q + k] for k in range(q)}
    rho_sub = "".join(row[k] for k in range(q)) + "".join(col[k] for k in range(q))
    subs = [rho_sub]
    ops = [rho_t]
    out = ""
    next_free = 2 * q
    for tensor, qubits, has_out in agent_tensors:
        sub = ""
        if has_out:
            sub = letters[next_free]
            out += letters[next_free]
            next_free += 1
        sub += "".join(col[k] for k in qubits)  # operator rows pair rho cols
        sub += "".join(row[k] for k in qubits)  # operator cols pair rho rows
        subs.append(sub)
        ops.append(tensor)
    expr = ",".join(subs) + "->" + out
    return np.einsum(expr, *ops, optimize=True)


def network_correlations(scenario: Scenario, states, plan: MeasurementPlan) -> CorrelationTensor:
    """P(a|x) = Tr[(tensor of eigenprojectors) (tensor of source states)]."""
    agent_qubits, q = _validate_network(scenario, states, plan)
    rho_t = _rho_tensor(states, q)
    n = scenario.n_agents
    shape = tuple(scenario.output_cards) + tuple(scenario.input_cards)
    arr = np.zeros(shape)
    for x in scenario.joint_inputs():
        tensors = []
        for i in range(1, n + 1):
            obs = plan.observable(i, x[i - 1])
            p0, p1 = obs.projectors()
            nq = obs.n_qubits
            stack = np.stack([p0, p1]).reshape((2,) + (2,) * (2 * nq))
            tensors.append((stack, agent_qubits[i], True))
        block = _contract(rho_t, q, tensors)
        arr[(Ellipsis,) + x] = block.real
    return CorrelationTensor(scenario, arr)


def network_correlator(scenario: Scenario, states, plan: MeasurementPlan, x) -> float:
    """<prod_i A_i^{x_i}> without building the full table; used by sweeps."""
    agent_qubits, q = _validate_network(scenario, states, plan)
    rho_t = _rho_tensor(states, q)
    tensors = []
    for i in range(1, scenario.n_agents + 1):
        obs = plan.observable(i, x[i - 1])
        nq = obs.n_qubits
        tensors.append((obs.matrix.reshape((2,) * (2 * nq)), agent_qubits[i], False))
    val = _contract(rho_t, q, tensors)
    return float(np.real(val))


def check_separable_factorization(P: CorrelationTensor, states, plan: MeasurementPlan,
                                  tol: float = 1e-9) -> bool:
    """Do the global correlators factor into per-source correlators?

    For a plan with declared per-qubit factors, the product form predicts
    E(x) = prod_j Tr[rho_j (tensor of the factors acting on source j)].
    """
    from .model import correlator

    scn = P.scenario
    if not plan.separable:
        raise InconsistentPlan("factorization check needs a declared separable plan")
    agent_qubits, _ = _validate_network(scn, states, plan)
    layout, _, _ = qubit_layout(scn)
    for x in scn.joint_inputs():
        predicted = 1.0
        for j in range(1, scn.n_sources + 1):
            agents = scn.agents_of_source(j)
            op = np.ones((1, 1), dtype=complex)
            for i in agents:
                obs = plan.observable(i, x[i - 1])
                slot = sorted(scn.sharing[i - 1]).index(j)
                op = np.kron(op, obs.factors[slot])
            predicted *= float(np.real(np.trace(states[j - 1].rho @ op)))
        if abs(predicted - correlator(P, x)) > tol:
            return False
    return True


def preset_bell_epr(visibility: float = 1.0):
    """Single EPR pair with chained-canonical settings: C2 = 2*sqrt(2)."""
    from .model import build_scenario

    scn = build_scenario(2, 1, [{1}, {1}])
    states = [make_state("epr", 2, visibility)]
    inv = 1.0 / np.sqrt(2.0)
    a0 = product_observable([(-inv, 0.0, inv)])   # (Z - X)/sqrt(2)
    a1 = product_observable([(inv, 0.0, inv)])    # (Z + X)/sqrt(2)
    b0 = product_observable([(0.0, 0.0, 1.0)])    # Z
    b1 = product_observable([(1.0, 0.0, 0.0)])    # X
    plan = MeasurementPlan(((a0, a1), (b0, b1)))
    return scn, states, plan


def preset_bilocal_epr(visibility: float = 1.0):
    """Two EPR sources, separable middle measurements: R_2 = sqrt(2) * v^2 scaling."""
    from .model import build_scenario

    scn = build_scenario(3, 2, [{1}, {1, 2}, {2}])
    states = [make_state("epr", 2, visibility), make_state("epr", 2, visibility)]
    inv = 1.0 / np.sqrt(2.0)
    end0 = product_observable([(inv, 0.0, inv)])    # (Z + X)/sqrt(2)
    end1 = product_observable([(-inv, 0.0, inv)])   # (Z - X)/sqrt(2)
    mid0 = product_observable([(0, 0, 1), (0, 0, 1)])  # Z x Z
    mid1 = product_observable([(1, 0, 0), (1, 0, 0)])  # X x X
    plan = MeasurementPlan(((end0, end1), (mid0, mid1), (end0, end1)))
    return scn, states, plan


def bell_state_measurement_observable() -> Observable:
    """Entangled two-qubit observable: Bell pair on the even-parity sector.

    +1 eigenspace spanned by |Phi+> and |01>, -1 by |Phi-> and |10>; the
    block structure of this matrix admits no tensor-product form, so it
    breaks the per-source factorization on purpose.
    """
    m = np.zeros((4, 4), dtype=complex)
    m[0, 3] = m[3, 0] = 1.0   # |00><11| + |11><00|
    m[1, 1] = 1.0
    m[2, 2] = -1.0
    return Observable(m, None)


def random_separable_plan(scenario: Scenario, rng: np.random.Generator) -> MeasurementPlan:
    """Random per-qubit Bloch directions for every agent and input."""
    _, agent_qubits, _ = qubit_layout(scenario)
    rows = []
    for i in range(1, scenario.n_agents + 1):
        row = []
        for _ in range(scenario.input_cards[i - 1]):
            dirs = rng.normal(size=(len(agent_qubits[i]), 3))
            row.append(product_observable(dirs))
        rows.append(tuple(row))
    return MeasurementPlan(tuple(rows))
