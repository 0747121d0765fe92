"""Alternating optimization for the conservative rate and power problems.

One iteration = equalizer step (per user, per stream, each a small SDP
minimizing the certified worst-case MSE), reciprocal weight update, then
a precoder SDP that re-optimizes the precoding matrix, the common-rate
split and the auxiliary rate variables with equalizers/weights fixed.
The rate objective is nondecreasing and the power objective nonincreasing
across iterations because every step re-optimizes one block while the
previous iterate stays feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import conic
from .conic import ConicProblem
from .lmi import (
    add_complex_var,
    build_common_lmi,
    build_power_constraint,
    build_private_lmi,
    build_scalar_square_epigraph,
)
from .model import Precoder, RateSplit, SystemConfig, precoder_power
from .uncertainty import UncertaintyRegion
from .wmse import WmseState, wmse

__all__ = [
    "AoConfig",
    "DesignSpec",
    "DesignResult",
    "restrict_nors",
    "equalizer_step",
    "weight_step",
    "precoder_step_rate",
    "precoder_step_power",
    "bootstrap_power_problem",
    "run_ao",
]

LOG2E = float(np.log2(np.e))


@dataclass(frozen=True)
class AoConfig:
    """Convergence control for the alternating optimization."""

    tol_rel: float = 1e-4
    max_iter: int = 200
    bootstrap_max: int = 10
    init_strategy: str = "mrt_equal_split"  # or "zf_equal_split"
    warm_start: Precoder | None = None
    solver_tol: float = 1e-7
    solver_max_iter: int = 100

    def __post_init__(self):
        if self.tol_rel <= 0:
            raise ValueError("tol_rel must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class DesignSpec:
    """What to solve: objective kind, rate target, and RS vs NoRS."""

    objective: str  # "maxmin" or "minpower"
    rs: bool = True
    target: float | None = None

    def __post_init__(self):
        if self.objective not in ("maxmin", "minpower"):
            raise ValueError("objective must be 'maxmin' or 'minpower'")
        if self.objective == "minpower" and (self.target is None or self.target < 0):
            raise ValueError("minpower needs a nonnegative target rate")


def restrict_nors(spec: DesignSpec) -> DesignSpec:
    """The conventional scheme: zero split, no common stream or equalizers."""
    return replace(spec, rs=False)


@dataclass
class DesignResult:
    precoder: Precoder
    split: RateSplit
    wmse_state: WmseState
    objective: float
    per_user_conservative_rates: np.ndarray  # total (private + split share)
    private_conservative_rates: np.ndarray
    common_conservative_rates: np.ndarray    # per user; zeros under NoRS
    trace: list
    status: str  # Converged | IterationCap | Infeasible
    iterations: int = 0


class SolverStepError(RuntimeError):
    def __init__(self, status: str):
        super().__init__(f"conic solve ended with status {status}")
        self.status = status


def _solve(problem: ConicProblem, ao: AoConfig) -> conic.Solution:
    sol = conic.solve(problem, tol=ao.solver_tol, max_iter=ao.solver_max_iter)
    if sol.status != "Optimal":
        raise SolverStepError(sol.status)
    return sol


def equalizer_step(region: UncertaintyRegion, P: Precoder, sigma2: float,
                   stream: str, k: int, ao: AoConfig = AoConfig()):
    """Conservative MMSE equalizer: min over g of max over the ball of the MSE.

    Returns the abstracted equalizer and the certified worst-case MSE
    tau* + |g*|^2 sigma2.
    """
    problem = ConicProblem()
    g = add_complex_var(problem, "g")
    tau = problem.add_var("tau")[0]
    lam = problem.add_var("lam")[0]
    s = problem.add_var("s")[0]
    if stream == "private":
        build_private_lmi(problem, region.h_hat, region.delta, P.pp, g, k, tau, lam)
    elif stream == "common":
        build_common_lmi(problem, region.h_hat, region.delta, P.matrix, g, tau, lam)
    else:
        raise ValueError(f"unknown stream {stream!r}")
    build_scalar_square_epigraph(problem, g, s)
    problem.set_objective([(tau, 1.0), (s, sigma2)], sense="min")
    sol = _solve(problem, ao)
    g_opt = g.value(sol.x)
    eps = float(sol.objective)
    return g_opt, max(eps, 1e-12)


def weight_step(eps_cons: float) -> float:
    """Reciprocal weight update; clamps at 1 for zero-rate streams."""
    if eps_cons <= 0:
        raise ValueError("conservative MMSE must be positive")
    return 1.0 / min(eps_cons, 1.0)


def _wmse_affine_bound(u: float, g: complex, sigma2: float) -> tuple[float, float]:
    """Constants (a, b) with WMSE = a*tau + b for fixed equalizer/weight."""
    return u, u * abs(g) ** 2 * sigma2 - float(np.log2(u))


def _precoder_problem(regions, ws: WmseState, sigma2: float, rs: bool,
                      n_private: int):
    """Common scaffolding for the rate and power precoder SDPs.

    Returns the problem plus handles; the caller adds the objective,
    the power constraint / variable, and the rate coupling rows.
    """
    K = len(regions)
    Nt = regions[0].h_hat.shape[0]
    problem = ConicProblem()
    ncols = n_private + (1 if rs else 0)
    P = add_complex_var(problem, "P", (Nt, ncols))
    tauk = problem.add_var("tau", K)
    lamk = problem.add_var("lam", K)
    handles = {"P": P, "tau": tauk, "lam": lamk}
    if rs:
        handles["tau_c"] = problem.add_var("tau_c", K)
        handles["lam_c"] = problem.add_var("lam_c", K)
        handles["C"] = problem.add_var("C", K)
        handles["R_c"] = problem.add_var("R_c")[0]

    # split the variable matrix into views: column 0 is common when rs
    if rs:
        Pp_var = _cv_cols(P, 1, ncols)
    else:
        Pp_var = P
    handles["Pp"] = Pp_var

    for k, region in enumerate(regions):
        build_private_lmi(problem, region.h_hat, region.delta, Pp_var,
                          complex(ws.g[k]), k, tauk[k], lamk[k])
        if rs:
            build_common_lmi(problem, region.h_hat, region.delta, P,
                             complex(ws.g_c[k]), handles["tau_c"][k], handles["lam_c"][k])
            problem.add_nonneg([(handles["C"][k], 1.0)])
    if rs:
        terms = [(int(i), 1.0) for i in handles["C"]] + [(handles["R_c"], -1.0)]
        problem.add_eq(terms, 0.0)
    return problem, handles


def _cv_cols(P, j0, j1):
    """Column slice of a matrix-shaped ComplexVar."""
    from .lmi import ComplexVar

    return ComplexVar(P.re[:, j0:j1], P.im[:, j0:j1], (P.re.shape[0], j1 - j0))


def _add_rate_rows(problem, handles, ws, sigma2, rs, r_t_terms, r_t_const):
    """Rows encoding 1 - WMSE_k + C_k >= R_t and 1 - WMSE_c,k >= R_c.

    r_t_terms/r_t_const describe R_t, which is a variable for the rate
    problem and a constant target for the power problem.
    """
    K = len(handles["tau"])
    for k in range(K):
        a, b = _wmse_affine_bound(float(ws.u[k]), complex(ws.g[k]), sigma2)
        terms = [(int(handles["tau"][k]), -a)]
        const = 1.0 - b - r_t_const
        if rs:
            terms.append((int(handles["C"][k]), 1.0))
        terms.extend((i, -c) for i, c in r_t_terms)
        problem.add_nonneg(terms, const)
        if rs:
            a_c, b_c = _wmse_affine_bound(float(ws.u_c[k]), complex(ws.g_c[k]), sigma2)
            problem.add_nonneg(
                [(int(handles["tau_c"][k]), -a_c), (handles["R_c"], -1.0)],
                1.0 - b_c,
            )


def _extract_design(sol, handles, rs, K):
    Pmat = handles["P"].value(sol.x)
    if rs:
        precoder = Precoder(Pmat[:, 0], Pmat[:, 1:])
        c = np.maximum(sol.x[handles["C"]], 0.0)
        r_c = float(np.sum(c))
        split = RateSplit(c, r_c)
    else:
        precoder = Precoder(np.zeros(Pmat.shape[0], complex), Pmat)
        split = RateSplit.zeros(K)
    taus = {"tau": sol.x[handles["tau"]].copy()}
    if rs:
        taus["tau_c"] = sol.x[handles["tau_c"]].copy()
    return precoder, split, taus


def precoder_step_rate(regions, ws: WmseState, sigma2: float, Pt: float,
                       rs: bool = True, ao: AoConfig = AoConfig()):
    """Max-min precoder SDP at fixed equalizers/weights."""
    K = len(regions)
    problem, handles = _precoder_problem(regions, ws, sigma2, rs, K)
    R_t = problem.add_var("R_t")[0]
    _add_rate_rows(problem, handles, ws, sigma2, rs, [(R_t, 1.0)], 0.0)
    build_power_constraint(problem, handles["P"], budget=Pt)
    problem.set_objective([(R_t, 1.0)], sense="max")
    sol = _solve(problem, ao)
    precoder, split, taus = _extract_design(sol, handles, rs, K)
    return precoder, split, float(sol.objective), taus


def precoder_step_power(regions, ws: WmseState, sigma2: float, target: float,
                        rs: bool = True, ao: AoConfig = AoConfig()):
    """Power-minimizing precoder SDP at fixed equalizers/weights.

    Raises SolverStepError with status "Infeasible" when no precoder meets
    the target under the current equalizers/weights.
    """
    K = len(regions)
    problem, handles = _precoder_problem(regions, ws, sigma2, rs, K)
    t = problem.add_var("pnorm")[0]
    _add_rate_rows(problem, handles, ws, sigma2, rs, [], float(target))
    build_power_constraint(problem, handles["P"], t_idx=t)
    problem.add_nonneg([(t, 1.0)])
    problem.set_objective([(t, 1.0)], sense="min")
    sol = _solve(problem, ao)
    precoder, split, taus = _extract_design(sol, handles, rs, K)
    return precoder, split, precoder_power(precoder), taus


def _initial_precoder(regions, cfg: SystemConfig, rs: bool, ao: AoConfig,
                      budget: float) -> Precoder:
    if ao.warm_start is not None:
        return _warm_started(ao.warm_start, regions, rs, budget)
    H = np.column_stack([r.h_hat for r in regions])
    K = H.shape[1]
    private_budget = budget / 2 if rs else budget
    if ao.init_strategy == "mrt_equal_split":
        cols = H / np.linalg.norm(H, axis=0, keepdims=True)
    elif ao.init_strategy == "zf_equal_split":
        pinv = np.linalg.pinv(H.conj().T)
        cols = pinv / np.linalg.norm(pinv, axis=0, keepdims=True)
    else:
        raise ValueError(f"unknown init strategy {ao.init_strategy!r}")
    pp = cols * np.sqrt(private_budget / K)
    if rs:
        u, _, _ = np.linalg.svd(H, full_matrices=False)
        pc = u[:, 0] * np.sqrt(budget / 2)
    else:
        pc = np.zeros(H.shape[0], dtype=complex)
    return Precoder(pc, pp)


def _warm_started(P: Precoder, regions, rs: bool, budget: float | None) -> Precoder:
    """Reuse a previous design; give RS a small common direction if absent.

    budget=None (power problem) adds the common direction on top without
    rescaling, so the warm start stays rate-feasible.
    """
    pc = P.pc.copy()
    pp = P.pp.copy()
    ref = budget if budget is not None else max(precoder_power(P), 1.0)
    if rs and np.linalg.norm(pc) == 0.0:
        H = np.column_stack([r.h_hat for r in regions])
        u, _, _ = np.linalg.svd(H, full_matrices=False)
        pc = u[:, 0] * np.sqrt(0.01 * ref)
    if not rs:
        pc = np.zeros_like(pc)
    total = np.sum(np.abs(pc) ** 2) + np.sum(np.abs(pp) ** 2)
    if budget is not None and total > budget > 0:
        scale = np.sqrt(budget / total)
        pc, pp = pc * scale, pp * scale
    return Precoder(pc, pp)


def _update_state(regions, P: Precoder, sigma2: float, rs: bool, ao: AoConfig):
    """Equalizer and weight steps for all users and streams.

    Also returns the certified worst-case MSEs the weights were derived
    from; rates reported to the caller must come from these, not from the
    stale-weight bound inside the SDPs (that bound is only a certificate
    when the weight is exactly the reciprocal of the certified MSE).
    """
    K = len(regions)
    g_c = np.zeros(K, complex)
    g = np.zeros(K, complex)
    u_c = np.ones(K)
    u = np.ones(K)
    eps_p = np.ones(K)
    eps_c = np.ones(K)
    for k, region in enumerate(regions):
        gk, epsk = equalizer_step(region, P, sigma2, "private", k, ao)
        g[k] = gk
        u[k] = weight_step(epsk)
        eps_p[k] = epsk
        if rs:
            gck, epsck = equalizer_step(region, P, sigma2, "common", k, ao)
            g_c[k] = gck
            u_c[k] = weight_step(epsck)
            eps_c[k] = epsck
    return WmseState(g_c=g_c, g=g, u_c=u_c, u=u), eps_p, eps_c


def _certified_rates(eps_p, eps_c, rs: bool):
    """Sound per-stream rate certificates from certified worst-case MSEs.

    With the reciprocal weight the WMSE bound collapses to -log2(eps),
    which lower-bounds every channel's rate because eps dominates every
    channel's MSE (weights clamp at 1, keeping the bound valid for
    zero-rate streams)."""
    private = np.array([1.0 - wmse(e, weight_step(e)) for e in eps_p])
    if rs:
        common = np.array([1.0 - wmse(e, weight_step(e)) for e in eps_c])
    else:
        common = np.zeros_like(private)
    return private, common


def _consistent_split(split: RateSplit, common, rs: bool) -> RateSplit:
    """Shrink the split so the credited shares fit the certified common rate."""
    if not rs or split.r_c <= 0:
        return split
    scale = min(1.0, max(0.0, float(np.min(common)) / split.r_c))
    return RateSplit(split.c * scale, split.r_c * scale)


def _finalize(regions, P, split, sigma2, rs, ao):
    """Refresh the state on the final precoder and certify its rates."""
    ws, eps_p, eps_c = _update_state(regions, P, sigma2, rs, ao)
    private, common = _certified_rates(eps_p, eps_c, rs)
    split = _consistent_split(split, common, rs)
    return ws, private, common, split


def run_ao(spec: DesignSpec, regions, cfg: SystemConfig,
           ao: AoConfig = AoConfig()) -> DesignResult:
    """Full alternating optimization for one design problem."""
    K = len(regions)
    if spec.rs and K < 2:
        raise ValueError("rate splitting needs at least two users")
    if spec.objective == "maxmin":
        return _run_maxmin(spec, regions, cfg, ao, budget=cfg.Pt)
    return _run_minpower(spec, regions, cfg, ao)


def _run_maxmin(spec, regions, cfg, ao, budget, max_iter=None) -> DesignResult:
    K = len(regions)
    P = _initial_precoder(regions, cfg, spec.rs, ao, budget)
    trace = []
    status = "IterationCap"
    ws = WmseState.initial(K)
    split = RateSplit.zeros(K)
    taus = {"tau": np.ones(K), "tau_c": np.ones(K)}
    cap = max_iter if max_iter is not None else ao.max_iter
    prev = None
    for it in range(cap):
        ws, _, _ = _update_state(regions, P, cfg.sigma2, spec.rs, ao)
        P, split, obj, taus = precoder_step_rate(
            regions, ws, cfg.sigma2, budget, rs=spec.rs, ao=ao)
        trace.append(obj)
        if prev is not None and abs(obj - prev) / max(1.0, abs(obj)) < ao.tol_rel:
            status = "Converged"
            prev = obj
            break
        prev = obj
    ws, private, common, split = _finalize(regions, P, split, cfg.sigma2, spec.rs, ao)
    return DesignResult(
        precoder=P, split=split, wmse_state=ws, objective=float(prev),
        per_user_conservative_rates=private + split.c,
        private_conservative_rates=private,
        common_conservative_rates=common,
        trace=trace, status=status, iterations=len(trace),
    )


def bootstrap_power_problem(spec: DesignSpec, regions, cfg: SystemConfig,
                            ao: AoConfig):
    """Find a rate-feasible starting precoder by sweeping power budgets.

    Runs short max-min optimizations at budgets P0 * 2^j until the
    achieved conservative rate reaches the target; P0 is the single-user
    AWGN power needed for the target, a principled lower starting scale.
    """
    target = spec.target
    if target == 0:
        Nt = regions[0].h_hat.shape[0]
        return Precoder.zeros(Nt, len(regions))
    p0 = cfg.sigma2 * (2.0 ** target - 1.0)
    rate_spec = replace(spec, objective="maxmin", target=None)
    carried = None
    for j in range(ao.bootstrap_max + 1):
        budget = p0 * 2.0 ** j
        # run each stage from a fresh start and (when available) from the
        # previous stage's design rescaled to the new budget; keep the better.
        starts = [None] if carried is None else [None, carried]
        best = None
        for start in starts:
            stage_ao = ao if start is None else replace(ao, warm_start=start)
            result = _run_maxmin(rate_spec, regions, cfg, stage_ao,
                                 budget=budget, max_iter=5)
            if best is None or result.objective > best.objective:
                best = result
        if float(np.min(best.per_user_conservative_rates)) >= target:
            return best.precoder
        scale = np.sqrt(2.0)
        carried = Precoder(best.precoder.pc * scale, best.precoder.pp * scale)
    return None


def _run_minpower(spec, regions, cfg, ao) -> DesignResult:
    K = len(regions)
    if ao.warm_start is not None:
        P = _warm_started(ao.warm_start, regions, spec.rs, budget=None)
    else:
        P = bootstrap_power_problem(spec, regions, cfg, ao)
    if P is None:
        return _infeasible_result(K, regions)
    trace = []
    status = "IterationCap"
    split = RateSplit.zeros(K)
    prev = None
    final = None
    for it in range(ao.max_iter):
        ws, eps_p, eps_c = _update_state(regions, P, cfg.sigma2, spec.rs, ao)
        try:
            P, split, power, taus = precoder_step_power(
                regions, ws, cfg.sigma2, spec.target, rs=spec.rs, ao=ao)
        except SolverStepError as err:
            if err.status == "Infeasible" and not trace:
                return _infeasible_result(K, regions)
            raise
        trace.append(power)
        if prev is not None and abs(power - prev) / max(1.0, abs(power)) < ao.tol_rel:
            # power has settled; accept only once the refreshed certificate
            # actually attains the target (the in-loop bound uses a stale
            # weight and can claim slightly more rate than is certified)
            final = _finalize(regions, P, split, cfg.sigma2, spec.rs, ao)
            if float(np.min(final[1] + final[3].c)) >= spec.target - 1e-7:
                status = "Converged"
                prev = power
                break
            final = None
        prev = power
    if final is None:
        final = _finalize(regions, P, split, cfg.sigma2, spec.rs, ao)
    ws, private, common, split = final
    return DesignResult(
        precoder=P, split=split, wmse_state=ws, objective=float(prev),
        per_user_conservative_rates=private + split.c,
        private_conservative_rates=private,
        common_conservative_rates=common,
        trace=trace, status=status, iterations=len(trace),
    )


def _infeasible_result(K, regions) -> DesignResult:
    Nt = regions[0].h_hat.shape[0]
    return DesignResult(
        precoder=Precoder.zeros(Nt, K), split=RateSplit.zeros(K),
        wmse_state=WmseState.initial(K), objective=float("nan"),
        per_user_conservative_rates=np.full(K, np.nan),
        private_conservative_rates=np.full(K, np.nan),
        common_conservative_rates=np.full(K, np.nan),
        trace=[], status="Infeasible",
    )
