"""Network Bell functionals and inequality evaluations.

The central quantities are the pair (I, J) built from full n-party
correlators with the independent agents' inputs summed over and the
remaining inputs clamped to a fixed value:

    I = 2^-k  sum_{x_I}                E(x_I; x_rest = 0)
    J = 2^-k  sum_{x_I} (-1)^(sum x_I) E(x_I; x_rest = 1)

and the nonlinear combination R_k = |I|^(1/k) + |J|^(1/k), bounded by 1
for network-classical models, sqrt(2) for quantum models, and 2 for all
non-signaling correlations.  The clamp values (0 for I, 1 for J) are the
canonical convention here; both are exposed as parameters because the
all-zero variant also appears in the literature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Mismatch, NonBinary, OutOfRange, WrongArity
from .model import CorrelationTensor, correlator

CLASSICAL_BOUND = 1.0
QUANTUM_BOUND = math.sqrt(2.0)
NONSIGNALING_BOUND = 2.0
SVETLICHNY_BOUND = 4.0
CCA_BOUND = 6.0
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class IndependentSet:
    """Agents that pairwise share no source; indices are 1-based."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(self.indices))
        if len(idx) != len(set(idx)) or not idx:
            raise Mismatch("independent set must be nonempty distinct indices")
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class BellReport:
    i_value: float
    j_value: float
    r_value: float
    k: int
    sign_i: int
    sign_j: int
    bounds: dict[str, float]
    violated: dict[str, bool]
    classification: str

    def recompute_r(self) -> float:
        return abs(self.i_value) ** (1.0 / self.k) + abs(self.j_value) ** (1.0 / self.k)


def _require_binary(P: CorrelationTensor, ind: IndependentSet):
    scn = P.scenario
    if any(c != 2 for c in scn.output_cards):
        raise NonBinary("binary outputs required")
    for i in ind.indices:
        if not 1 <= i <= scn.n_agents:
            raise Mismatch(f"agent {i} outside scenario")
        if scn.input_cards[i - 1] != 2:
            raise NonBinary("independent agents need binary inputs")


def eval_IJ(P: CorrelationTensor, ind: IndependentSet, i_fixed: int = 0,
            j_fixed: int = 1) -> tuple[float, float]:
    """The linear pair (I, J) over the independent agents' input cube."""
    _require_binary(P, ind)
    scn = P.scenario
    rest = [i for i in range(1, scn.n_agents + 1) if i not in ind.indices]
    for r in rest:
        for v in (i_fixed, j_fixed):
            if not 0 <= v < scn.input_cards[r - 1]:
                raise NonBinary("fixed input value outside the rest agents' range")
    k = ind.k
    total_i = 0.0
    total_j = 0.0
    for bits in range(2**k):
        xs_i = [i_fixed] * scn.n_agents
        xs_j = [j_fixed] * scn.n_agents
        parity = 0
        for pos, agent in enumerate(ind.indices):
            b = (bits >> pos) & 1
            xs_i[agent - 1] = b
            xs_j[agent - 1] = b
            parity ^= b
        total_i += correlator(P, xs_i)
        total_j += (-1.0) ** parity * correlator(P, xs_j)
    scale = 2.0**-k
    return scale * total_i, scale * total_j


def eval_Rk(P: CorrelationTensor, ind: IndependentSet, i_fixed: int = 0,
            j_fixed: int = 1) -> BellReport:
    """Full report: R_k against the classical/quantum/non-signaling bounds."""
    i_val, j_val = eval_IJ(P, ind, i_fixed, j_fixed)
    k = ind.k
    r = abs(i_val) ** (1.0 / k) + abs(j_val) ** (1.0 / k)
    bounds = {
        "classical": CLASSICAL_BOUND,
        "quantum": QUANTUM_BOUND,
        "nonsignaling": NONSIGNALING_BOUND,
    }
    violated = {name: r > b + BOUND_TOL for name, b in bounds.items()}
    if not violated["classical"]:
        cls = "classical"
    elif not violated["quantum"]:
        cls = "quantum"
    elif not violated["nonsignaling"]:
        cls = "nonsignaling"
    else:
        cls = "supra-nonsignaling"
    return BellReport(
        i_value=i_val,
        j_value=j_val,
        r_value=r,
        k=k,
        sign_i=int(np.sign(i_val)) if i_val else 0,
        sign_j=int(np.sign(j_val)) if j_val else 0,
        bounds=bounds,
        violated=violated,
        classification=cls,
    )


def eval_cyclic(P: CorrelationTensor, ind: IndependentSet, i_fixed: int = 0,
                j_fixed: int = 1) -> float:
    """|I| + |J|: the linear variant used for cyclic networks (bound 2)."""
    i_val, j_val = eval_IJ(P, ind, i_fixed, j_fixed)
    return abs(i_val) + abs(j_val)


def _three_party_correlators(P: CorrelationTensor) -> np.ndarray:
    scn = P.scenario
    if scn.n_agents != 3:
        raise WrongArity("tripartite functional needs exactly 3 agents")
    if not scn.binary:
        raise NonBinary("tripartite functionals are defined for binary scenarios")
    E = np.empty((2, 2, 2))
    for x in np.ndindex(2, 2, 2):
        E[x] = correlator(P, x)
    return E


def eval_svetlichny(P: CorrelationTensor) -> float:
    """Svetlichny combination, classically bounded by 4.

    Signs: minus on E(000) and E(111), plus on the six mixed settings.
    """
    E = _three_party_correlators(P)
    total = -E[0, 0, 0] - E[1, 1, 1]
    for x in np.ndindex(2, 2, 2):
        if x != (0, 0, 0) and x != (1, 1, 1):
            total += E[x]
    return float(total)


def eval_cca(P: CorrelationTensor) -> float:
    """All-plus sum of the first seven correlators minus E(111), bound 6."""
    E = _three_party_correlators(P)
    return float(E.sum() - 2.0 * E[1, 1, 1])


def chsh_quantity(P: CorrelationTensor) -> float:
    """C2 = |<A0 B0> + <A1 B0>| + |<A0 B1> - <A1 B1>| for bipartite binary P."""
    scn = P.scenario
    if scn.n_agents != 2:
        raise WrongArity("CHSH quantity needs exactly 2 agents")
    if not scn.binary:
        raise NonBinary("CHSH quantity is defined for binary scenarios")
    E = np.empty((2, 2))
    for x in np.ndindex(2, 2):
        E[x] = correlator(P, x)
    return float(abs(E[0, 0] + E[1, 0]) + abs(E[0, 1] - E[1, 1]))


def chained_bell(P: CorrelationTensor, s: int) -> float:
    """Chained Bell quantity with s settings per side (0-based labels).

    I_s = P(a=b | x=0, y=s-1)
        + sum_i P(a!=b | x=i, y=i)
        + sum_i P(a!=b | x=i+1, y=i)

    2s probability terms in total; deterministic models give I_s >= 1 and
    the two-setting case obeys I_2 = 2 - C2/2 whenever the correlator signs
    match the CHSH absolute-value resolution.
    """
    scn = P.scenario
    if scn.n_agents != 2:
        raise WrongArity("chained Bell quantity needs exactly 2 agents")
    if s < 2:
        raise OutOfRange("need at least two settings")
    if scn.input_cards[0] < s or scn.input_cards[1] < s:
        raise WrongArity(f"both parties need at least {s} settings")
    if any(c != 2 for c in scn.output_cards):
        raise NonBinary("chained Bell quantity needs binary outputs")

    def p_equal(x, y):
        block = P.table[(slice(None), slice(None), x, y)]
        return float(block[0, 0] + block[1, 1])

    total = p_equal(0, s - 1)
    for i in range(s):
        total += 1.0 - p_equal(i, i)
    for i in range(s - 1):
        total += 1.0 - p_equal(i + 1, i)
    return total


def i2_from_chsh(c2: float) -> float:
    """Chained two-setting value from the CHSH quantity: 2 - C2/2."""
    if not -BOUND_TOL <= c2 <= 4.0 + BOUND_TOL:
        raise OutOfRange(f"C2 = {c2} outside [0, 4]")
    return 2.0 - 0.5 * c2


def variational_distance(p, q) -> float:
    """D(p, q) = (1/2) sum |p - q| for distributions on a common support."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise Mismatch("distributions must share a support size")
    for v, name in ((p, "p"), (q, "q")):
        if v.min() < -1e-9 or abs(v.sum() - 1.0) > 1e-9:
            raise Mismatch(f"{name} is not a normalized distribution")
    return float(0.5 * np.abs(p - q).sum())
