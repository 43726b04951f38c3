"""Causal compatibility solvers.

Single-source classes form a convex polytope, so membership is one exact
linear program.  Multisource classes constrain the weights to a product
of per-source simplices, a nonconvex (star-convex) feasibility problem;
it is attacked here by alternating block updates with multiple restarts
(nonnegative least squares to descend quickly, then block LPs minimizing
the decisive L-infinity residual), plus two sound one-sided certificates:

* inequality certificates: the program's own functional constraints
  (R_k <= c, |I| <= 1, |J| <= 1), the network-classical bound R_k <= 1
  for the unrelaxed class, and hull bounds on full-correlator functionals
  derived from the class's parity span;
* the convex-hull LP over all strategy columns, whose infeasibility
  rules out every product measure at the cardinality used.

A failed search without a certificate is always reported Unknown, never
Incompatible.  Every Compatible verdict carries weights that are
re-verified to reconstruct P before returning.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import DimensionMismatch, Mismatch, TooLarge
from .functionals import IndependentSet, eval_IJ
from .model import (
    CausalClass,
    CorrelationTensor,
    Scenario,
    check_nonsignaling,
    independent_agents,
    trivial_class,
    uniform_box,
)
from .strategies import (
    SourceWeights,
    StrategyMatrix,
    build_strategy_matrix,
    default_source_cards,
)

ORACLE_MAX_DIM = 256
ORACLE_MAX_COLUMNS = 16
ORACLE_MAX_GRID = 64
ORACLE_POINT_BUDGET = 5_000_000


@dataclass(frozen=True)
class SolverConfig:
    source_cards: tuple[int, ...] | None = None
    lambda_cap: int = 16
    restarts: int = 8
    max_iters: int = 60
    tol_feas: float = 1e-7
    seed: int = 0
    c: float = 1.0
    use_oracle: bool = True
    oracle_grid: int = 32

    def __post_init__(self):
        if self.tol_feas <= 0:
            raise Mismatch("tol_feas must be positive")
        if not 1.0 <= self.c <= 2.0:
            raise Mismatch("the class parameter c must lie in [1, 2]")
        if self.restarts < 1 or self.max_iters < 1:
            raise Mismatch("restarts and max_iters must be positive")


@dataclass(frozen=True)
class Verdict:
    status: str  # "compatible" | "incompatible" | "unknown"
    residual: float
    cardinality: tuple[int, ...]
    weights: SourceWeights | None = None
    certificate: str | None = None
    truncated: bool = False
    info: dict = field(default_factory=dict)

    @property
    def compatible(self) -> bool:
        return self.status == "compatible"

    @property
    def incompatible(self) -> bool:
        return self.status == "incompatible"

    def sound_refutation(self) -> bool:
        """Incompatible with a certificate valid beyond the used cardinality."""
        if not self.incompatible:
            return False
        if self.certificate == "inequality":
            return True
        return self.certificate in ("lp", "oracle") and not self.truncated


def _min_linf_lp(M: np.ndarray, p: np.ndarray):
    """min_t ||M w - p||_inf over the simplex; returns (t, w)."""
    d, n = M.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    ones = np.ones((d, 1))
    A_ub = np.block([[M, -ones], [-M, -ones]])
    b_ub = np.concatenate([p, -p])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
        bounds=[(0, None)] * n + [(0, None)], method="highs",
    )
    if not res.success:
        raise Mismatch(f"LP solver failed: {res.message}")
    return float(res.x[-1]), res.x[:-1]


def lp_membership(P: CorrelationTensor, M: StrategyMatrix,
                  tol_feas: float = 1e-7) -> Verdict:
    """Exact polytope membership for single-source strategy matrices."""
    if M.scenario.n_sources > 1:
        raise Mismatch("lp_membership handles single-source classes; "
                       "use network_feasibility for product measures")
    if P.scenario != M.scenario:
        raise DimensionMismatch("tensor and matrix live on different scenarios")
    t, w = _min_linf_lp(M.matrix, P.flat())
    if t <= tol_feas:
        weights = SourceWeights((w / w.sum(),)) if M.scenario.n_sources else None
        return Verdict("compatible", t, M.source_cards, weights, "lp", M.truncated)
    return Verdict("incompatible", t, M.source_cards, None, "lp", M.truncated)


def _parity_span(scenario: Scenario, cls: CausalClass) -> list[int]:
    """All parity functions f(x) = xor_i h_i(x_{I_i}) as bitmasks over inputs.

    Only defined for all-binary scenarios; each function is a bitmask over
    the joint inputs enumerated in scenario.joint_inputs() order.
    """
    inputs = list(scenario.joint_inputs())
    monomials = set()
    for s in cls.parent_inputs:
        for r in range(len(s) + 1):
            for combo in itertools.combinations(sorted(s), r):
                monomials.add(combo)
    basis = []
    for combo in sorted(monomials):
        mask = 0
        for ix, x in enumerate(inputs):
            val = 1
            for agent in combo:
                val &= x[agent - 1]
            if val:
                mask |= 1 << ix
        basis.append(mask)
    # GF(2) span of the basis masks
    span = {0}
    for b in basis:
        span |= {v ^ b for v in span}
    return sorted(span)


def correlator_functional_bound(scenario: Scenario, cls: CausalClass,
                                coefficients: dict) -> float:
    """Max of sum_x c(x) E(x) over all boxes compatible with the class.

    Valid upper bound: every class box is a mixture of class-deterministic
    boxes, whose correlators are (-1)^f(x) for f in the class parity span.
    """
    if not scenario.binary:
        raise Mismatch("parity-span bounds need binary scenarios")
    inputs = list(scenario.joint_inputs())
    coeff = np.array([coefficients.get(x, 0.0) for x in inputs])
    best = -math.inf
    for f in _parity_span(scenario, cls):
        signs = np.array([1.0 - 2.0 * ((f >> ix) & 1) for ix in range(len(inputs))])
        best = max(best, float(coeff @ signs))
    return best


def svetlichny_coefficients(scenario: Scenario) -> dict:
    if scenario.n_agents != 3:
        raise Mismatch("Svetlichny coefficients are tripartite")
    out = {}
    for x in scenario.joint_inputs():
        out[x] = -1.0 if x in ((0, 0, 0), (1, 1, 1)) else 1.0
    return out


def cca_coefficients(scenario: Scenario) -> dict:
    if scenario.n_agents != 3:
        raise Mismatch("tripartite coefficients required")
    return {x: (-1.0 if x == (1, 1, 1) else 1.0) for x in scenario.joint_inputs()}


def _functional_certificates(P, scenario, cls, cfg):
    """Sound inequality certificates; returns (verdict_info, violated_name)."""
    info = {}
    tol = 1e-9
    if scenario.binary:
        ind_agents = independent_agents(scenario)
        if len(ind_agents) >= 1:
            ind = IndependentSet(ind_agents)
            i_val, j_val = eval_IJ(P, ind)
            k = ind.k
            r = abs(i_val) ** (1.0 / k) + abs(j_val) ** (1.0 / k)
            info.update({"independent_set": ind_agents, "I": i_val, "J": j_val,
                         "R_k": r})
            binding = []
            if r > cfg.c + tol:
                binding.append(f"R_k <= c ({r:.6f} > {cfg.c})")
            if abs(i_val) > 1.0 + tol:
                binding.append(f"|I| <= 1 ({abs(i_val):.6f})")
            if abs(j_val) > 1.0 + tol:
                binding.append(f"|J| <= 1 ({abs(j_val):.6f})")
            info["binding"] = binding
            if binding:
                return info, "program-constraint: " + "; ".join(binding)
            # network-classical bound for the unrelaxed class
            if cls == trivial_class(scenario.n_agents) and r > 1.0 + tol:
                return info, f"network-classical R_k <= 1 ({r:.6f})"
        if scenario.n_agents == 3:
            from .functionals import eval_cca, eval_svetlichny

            for name, coeffs, value in (
                ("svetlichny", svetlichny_coefficients(scenario), eval_svetlichny(P)),
                ("tripartite-all-plus", cca_coefficients(scenario), eval_cca(P)),
            ):
                bound = correlator_functional_bound(scenario, cls, coeffs)
                info[f"{name}_bound"] = bound
                info[f"{name}_value"] = value
                if value > bound + 1e-7:
                    return info, f"{name} hull bound ({value:.6f} > {bound:.6f})"
    return info, None


def _block_matrix(M3: np.ndarray, mu, j: int, m: int) -> np.ndarray:
    """Contract all weight blocks except source j: result (d, c_j).

    M3 axis 1 + (m - jj) belongs to source jj (columns are little-endian
    with source 1 fastest, so reshaping puts source m first).
    """
    letters = "abcdefghijklmnop"
    subs = ["z" + letters[:m]]  # axis order: source m, m-1, ..., 1
    ops = [M3]
    for jj in range(1, m + 1):
        if jj == j:
            continue
        subs.append(letters[m - jj])
        ops.append(mu[jj - 1])
    expr = ",".join(subs) + "->z" + letters[m - j]
    return np.einsum(expr, *ops, optimize=True)


def _residual(M3, mu, p, m) -> float:
    vec = M3
    for jj in range(m, 0, -1):
        # source jj sits at axis 1 once all higher sources are contracted
        vec = np.tensordot(vec, mu[jj - 1], axes=([1], [0]))
    return float(np.abs(vec - p).max())


def _nnls_block(Bj: np.ndarray, p: np.ndarray, kappa: float = 10.0) -> np.ndarray:
    """Nonnegative least-squares block update with a normalization penalty row."""
    A = np.vstack([Bj, kappa * np.ones((1, Bj.shape[1]))])
    b = np.concatenate([p, [kappa]])
    w, _ = nnls(A, b)
    s = w.sum()
    return w / s if s > 0 else np.full(Bj.shape[1], 1.0 / Bj.shape[1])


def network_feasibility(P: CorrelationTensor, scenario: Scenario,
                        cls: CausalClass, cfg: SolverConfig) -> Verdict:
    """Star-convex feasibility P = R (mu_1 x ... x mu_m) with certificates."""
    if P.scenario != scenario:
        raise DimensionMismatch("tensor scenario mismatch")
    if cls.n_agents != scenario.n_agents:
        raise Mismatch("class arity disagrees with the scenario")
    ns = check_nonsignaling(P, tol=max(cfg.tol_feas, 1e-9))
    if not ns.passed:
        raise Mismatch(f"P is signaling (violation {ns.max_violation:.3e})")

    cards = cfg.source_cards or default_source_cards(scenario, cls, cfg.lambda_cap)
    info, violated = _functional_certificates(P, scenario, cls, cfg)
    if violated is not None:
        info["violated"] = violated
        return Verdict("incompatible", math.inf, tuple(cards), None,
                       "inequality", False, info)

    mat = build_strategy_matrix(scenario, cls, cards)
    p = P.flat()
    hull_res, hull_w = _min_linf_lp(mat.matrix, p)
    info["hull_residual"] = hull_res
    if hull_res > cfg.tol_feas:
        return Verdict("incompatible", hull_res, tuple(cards), None, "lp",
                       mat.truncated, info)

    m = scenario.n_sources
    if m <= 1:
        w = hull_w / hull_w.sum() if m == 1 else None
        weights = SourceWeights((w,)) if m == 1 else None
        return Verdict("compatible", hull_res, tuple(cards), weights, "lp",
                       mat.truncated, info)

    d = scenario.dimension
    M3 = mat.matrix.reshape((d,) + tuple(cards[::-1]))

    # hull-marginal initialization: per-source marginals of the joint weights
    joint = hull_w.reshape(tuple(cards[::-1]))
    hull_marginals = []
    for j in range(1, m + 1):
        axes = tuple(ax for ax in range(m) if ax != m - j)
        wj = joint.sum(axis=axes)
        wj = np.clip(wj, 0.0, None)
        wj = wj / wj.sum() if wj.sum() > 0 else np.full(cards[j - 1], 1.0 / cards[j - 1])
        hull_marginals.append(wj)

    best_res = math.inf
    best_mu = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng((cfg.seed, restart))
        if restart == 0:
            mu = [np.full(cj, 1.0 / cj) for cj in cards]
        elif restart == 1:
            mu = [w.copy() for w in hull_marginals]
        else:
            mu = [rng.dirichlet(np.ones(cj)) for cj in cards]
        # least-squares alternation does the heavy lifting; the block
        # L-infinity LP below decides the residual that the verdict uses
        last = math.inf
        for _ in range(cfg.max_iters):
            for j in range(1, m + 1):
                Bj = _block_matrix(M3, mu, j, m)
                mu[j - 1] = _nnls_block(Bj, p)
            res = _residual(M3, mu, p, m)
            if res < cfg.tol_feas or last - res < 1e-14:
                break
            last = res
        res = _residual(M3, mu, p, m)
        if res >= cfg.tol_feas:
            for _ in range(4):
                improved = False
                for j in range(1, m + 1):
                    Bj = _block_matrix(M3, mu, j, m)
                    t, wj = _min_linf_lp(Bj, p)
                    if t < res - 1e-13:
                        mu[j - 1] = wj / wj.sum()
                        res = t
                        improved = True
                if res < cfg.tol_feas or not improved:
                    break
        if res < best_res:
            best_res = res
            best_mu = [w.copy() for w in mu]
        if best_res < cfg.tol_feas:
            break

    if best_res < cfg.tol_feas:
        weights = SourceWeights(tuple(best_mu))
        recon = mat.mix(weights)
        check = float(np.abs(recon.flat() - p).max())
        if check > cfg.tol_feas:
            raise Mismatch("internal: weights fail to reconstruct P")
        info["residual_check"] = check
        return Verdict("compatible", best_res, tuple(cards), weights, None,
                       mat.truncated, info)

    if cfg.use_oracle:
        try:
            oracle = brute_force_oracle(P, scenario, cls, grid=cfg.oracle_grid,
                                        tol_feas=cfg.tol_feas, source_cards=cards)
        except TooLarge:
            oracle = None
        if oracle is not None and oracle.incompatible:
            info.update(oracle.info)
            return Verdict("incompatible", oracle.residual, tuple(cards), None,
                           "oracle", mat.truncated, info)

    info["best_residual"] = best_res
    return Verdict("unknown", best_res, tuple(cards), None, None,
                   mat.truncated, info)


def _simplex_grid(n_parts: int, grid: int) -> np.ndarray:
    """All compositions of `grid` into n_parts nonnegative integers, / grid."""
    combos = itertools.combinations(range(grid + n_parts - 1), n_parts - 1)
    points = []
    for dividers in combos:
        prev = -1
        parts = []
        for v in dividers:
            parts.append(v - prev - 1)
            prev = v
        parts.append(grid + n_parts - 2 - prev)
        points.append(parts)
    return np.array(points, dtype=float) / grid


def _count_grid_points(n_parts: int, grid: int) -> int:
    return math.comb(grid + n_parts - 1, n_parts - 1)


def brute_force_oracle(P: CorrelationTensor, scenario: Scenario, cls: CausalClass,
                       grid: int = 32, tol_feas: float = 1e-7,
                       source_cards=None) -> Verdict:
    """Exhaustive search over discretized per-source weight simplices.

    Compatible when some grid point reconstructs P within tol_feas plus the
    Lipschitz slack n_columns/grid; Incompatible when even the best grid
    point misses by more than the slack, which bounds the continuous
    optimum away from zero.
    """
    cards = tuple(source_cards or default_source_cards(scenario, cls))
    d = scenario.dimension
    n_cols = 1
    for c in cards:
        n_cols *= c
    if d > ORACLE_MAX_DIM or n_cols > ORACLE_MAX_COLUMNS or grid > ORACLE_MAX_GRID:
        raise TooLarge("oracle preconditions: d <= 256, columns <= 16, grid <= 64")
    total_points = 1
    for c in cards:
        total_points *= _count_grid_points(c, grid)
    if total_points > ORACLE_POINT_BUDGET:
        raise TooLarge(f"{total_points} grid points exceed the oracle budget")

    mat = build_strategy_matrix(scenario, cls, cards)
    p = P.flat()
    m = scenario.n_sources
    slack = n_cols / grid

    grids = [_simplex_grid(c, grid) for c in cards]
    if m == 1:
        diffs = mat.matrix @ grids[0].T - p[:, None]
        residuals = np.abs(diffs).max(axis=0)
        best_ix = int(residuals.argmin())
        best = float(residuals[best_ix])
        best_mu = (grids[0][best_ix],)
    else:
        M3 = mat.matrix.reshape((d,) + tuple(cards[::-1]))
        best = math.inf
        best_mu = None
        for combo in itertools.product(*(range(len(g)) for g in grids[:-1])):
            mus = [grids[j][combo[j]] for j in range(m - 1)]
            vec = M3
            for jj in range(m - 1, 0, -1):
                # keep axis 1 (source m) for batching; source jj sits at axis 2
                vec = np.tensordot(vec, mus[jj - 1], axes=([2], [0]))
            # vec: (d, c_m); batch the last source
            diffs = vec @ grids[-1].T - p[:, None]
            residuals = np.abs(diffs).max(axis=0)
            ix = int(residuals.argmin())
            if residuals[ix] < best:
                best = float(residuals[ix])
                best_mu = tuple(mus) + (grids[-1][ix],)

    info = {"oracle_grid": grid, "oracle_slack": slack, "oracle_residual": best}
    if best <= tol_feas + slack:
        return Verdict("compatible", best, cards, SourceWeights(best_mu),
                       "oracle", mat.truncated, info)
    return Verdict("incompatible", best, cards, None, "oracle", mat.truncated, info)


@dataclass(frozen=True)
class RayResult:
    t_star: float
    certified_upper: float | None
    steps: tuple[tuple[float, str], ...]


def star_ray_membership(P: CorrelationTensor, scenario: Scenario, cls: CausalClass,
                        cfg: SolverConfig, resolution: float = 1.0 / 64.0) -> RayResult:
    """Largest t with a Compatible verdict for P_t = t P + (1 - t) uniform.

    Unknown verdicts shrink the bracket from above like refutations do, so
    the reported threshold is conservative.  When the inequality constraint
    is what blocks P itself, the analytic crossing (c / R_k)^2-style bound
    is reported as certified_upper.
    """
    U = uniform_box(scenario)
    steps = []

    def probe(t: float) -> Verdict:
        table = t * P.table + (1.0 - t) * U.table
        Pt = CorrelationTensor(scenario, table)
        v = network_feasibility(Pt, scenario, cls, cfg)
        steps.append((t, v.status))
        return v

    certified_upper = None
    top = probe(1.0)
    if top.compatible:
        return RayResult(1.0, None, tuple(steps))
    if top.certificate == "inequality" and "R_k" in top.info:
        r = top.info["R_k"]
        k = len(top.info.get("independent_set", ())) or 1
        if r > 0:
            # |I|, |J| scale linearly in t, so R_k scales as t^(1/k)
            certified_upper = min(1.0, (cfg.c / r) ** k)

    lo, hi = 0.0, 1.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        v = probe(mid)
        if v.compatible:
            lo = mid
        else:
            hi = mid
    return RayResult(lo, certified_upper, tuple(steps))
