"""Optimal advertising against a single targeted buyer type.

The general path builds the segment program over vertex pairs of the
best-response polytopes.  Each pair ``{i, j}`` carries masses
``x = gamma_ij`` and ``y = gamma_ji`` and contributes

    x f(i) + y f(j) - k_ij * x y / (x + y),     k_ij = (R_i - R_j)(C_i - C_j) <= 0,

which is concave.  The harmonic term is modelled by an epigraph variable
``t <= x y / (x + y)``, equivalently the rotated cone
``(x - t)(y - t) >= t^2`` with ``x - t, y - t >= 0``.

Binary-state instances also have a closed-form path (:func:`solve_binary`)
that walks the piecewise-linear cost curve directly.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from .errors import SolverError, ValidationError
from .geometry import DEFAULT_BASIS_CAP, SegmentSet, all_vertices, build_segments, in_polytope
from .model import (
    AdvertisingRule,
    FloatArray,
    PosteriorDecomposition,
    SingleTypeInstance,
    best_action,
    decomposition_to_rule,
    evaluate_rule_single,
    rule_to_decomposition,
)

log = logging.getLogger(__name__)

ACTIVE_TOL = 1e-9
MERGE_POSTERIOR_TOL = 1e-7
MERGE_GAIN_TOL = 1e-7
SPARSITY_TOL = 1e-7


@dataclass
class OptimalityReport:
    """Pairs whose merge would strictly raise revenue, and over-dense posteriors."""

    merge_flags: list[tuple[int, int, float]] = field(default_factory=list)
    sparsity_flags: list[int] = field(default_factory=list)
    sparsity_limit: int = 0

    @property
    def ok(self) -> bool:
        return not self.merge_flags and not self.sparsity_flags

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "merge_flags": [{"s": s, "t": t, "gain": g} for s, t, g in self.merge_flags],
            "sparsity_flags": list(self.sparsity_flags),
            "sparsity_limit": self.sparsity_limit,
        }


@dataclass
class SolveReport:
    revenue: float
    decomposition: PosteriorDecomposition
    rule: AdvertisingRule
    diagnostics: dict = field(default_factory=dict)


@dataclass
class SegmentProgram:
    """Variables ``[w (per vertex), x (per strict pair), y (per strict pair)]``.

    Pairs whose slope product is zero are folded into the singleton masses:
    their objective term is exactly the sum of the two singleton terms.
    """

    vertices: FloatArray
    fvals: FloatArray
    pair_i: np.ndarray
    pair_j: np.ndarray
    neg_k: FloatArray

    @classmethod
    def from_segments(cls, segments: SegmentSet, *, zero_tol: float = 1e-12) -> "SegmentProgram":
        strict = [p for p in segments.strict_pairs() if p.slope_product < -zero_tol]
        return cls(
            vertices=segments.vertex_set.points,
            fvals=segments.R * segments.C,
            pair_i=np.array([p.i for p in strict], dtype=int),
            pair_j=np.array([p.j for p in strict], dtype=int),
            neg_k=np.array([-p.slope_product for p in strict], dtype=float),
        )

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.pair_i.size

    def split(self, gamma: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
        nv, npair = self.n_vertices, self.n_pairs
        return gamma[:nv], gamma[nv : nv + npair], gamma[nv + npair :]

    def objective(self, gamma: FloatArray) -> float:
        w, x, y = self.split(np.asarray(gamma, dtype=float))
        s = x + y
        harmonic = np.divide(x * y, s, out=np.zeros_like(s), where=s > 0)
        return float(
            self.fvals @ w + self.fvals[self.pair_i] @ x + self.fvals[self.pair_j] @ y + self.neg_k @ harmonic
        )

    def barycenter(self, gamma: FloatArray) -> FloatArray:
        w, x, y = self.split(np.asarray(gamma, dtype=float))
        V = self.vertices
        return w @ V + x @ V[self.pair_i] + y @ V[self.pair_j]

    def posteriors(self, gamma: FloatArray, tol: float = ACTIVE_TOL) -> tuple[FloatArray, FloatArray]:
        """One posterior per active singleton or pair."""
        w, x, y = self.split(np.asarray(gamma, dtype=float))
        V = self.vertices
        phis, etas = [], []
        for i in np.flatnonzero(w > tol):
            phis.append(w[i])
            etas.append(V[i])
        s = x + y
        for q in np.flatnonzero(s > tol):
            phis.append(s[q])
            etas.append((x[q] * V[self.pair_i[q]] + y[q] * V[self.pair_j[q]]) / s[q])
        return np.array(phis), np.array(etas).reshape(len(phis), V.shape[1])


def _solve_conic(prog: SegmentProgram, theta: FloatArray) -> tuple[FloatArray, dict]:
    import cvxpy as cp

    nv, npair = prog.n_vertices, prog.n_pairs
    V = prog.vertices
    w = cp.Variable(nv, nonneg=True)
    parts = [w]
    bary = V.T @ w
    obj = prog.fvals @ w
    cons = []
    if npair:
        x = cp.Variable(npair, nonneg=True)
        y = cp.Variable(npair, nonneg=True)
        t = cp.Variable(npair, nonneg=True)
        parts += [x, y]
        bary = bary + V[prog.pair_i].T @ x + V[prog.pair_j].T @ y
        obj = obj + prog.fvals[prog.pair_i] @ x + prog.fvals[prog.pair_j] @ y + prog.neg_k @ t
        cons.append(cp.SOC(x + y - 2 * t, cp.vstack([2 * t, x - y]), axis=0))
    cons.append(bary == theta)
    problem = cp.Problem(cp.Maximize(obj), cons)
    opts = {}
    if npair:
        opts = dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11, max_iter=400)
    try:
        with warnings.catch_warnings():
            # status is reported in the diagnostics instead
            warnings.simplefilter("ignore", UserWarning)
            problem.solve(solver="CLARABEL", **opts)
    except cp.error.SolverError as exc:  # pragma: no cover - backend failure
        raise SolverError(f"conic solve failed: {exc}") from exc
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"conic solve returned status {problem.status!r}")
    if problem.status != "optimal":
        log.warning("conic solve returned status %s", problem.status)
    gamma = np.concatenate([np.asarray(p.value, dtype=float).reshape(-1) for p in parts])
    stats = problem.solver_stats
    return np.clip(gamma, 0.0, None), {
        "backend": "clarabel",
        "status": problem.status,
        "iterations": getattr(stats, "num_iters", None),
        "objective": float(problem.value),
    }


def _solve_slsqp(prog: SegmentProgram, theta: FloatArray) -> tuple[FloatArray, dict]:
    nv, npair = prog.n_vertices, prog.n_pairs
    V = prog.vertices
    M = np.hstack([V.T, V[prog.pair_i].T, V[prog.pair_j].T])
    lin = np.concatenate([prog.fvals, prog.fvals[prog.pair_i], prog.fvals[prog.pair_j]])
    smooth = 1e-12

    def negobj(z):
        _, x, y = prog.split(z)
        s = x + y + smooth
        val = lin @ z + prog.neg_k @ (x * y / s)
        grad = lin.copy()
        grad[nv : nv + npair] += prog.neg_k * (y / s) ** 2
        grad[nv + npair :] += prog.neg_k * (x / s) ** 2
        return -val, -grad

    # feasible start: mass on the vertices of the polytope containing theta
    z0 = np.zeros(nv + 2 * npair)
    q, _ = nnls(V.T, theta)
    z0[:nv] = q
    res = minimize(
        negobj,
        z0,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, None)] * z0.size,
        constraints=[{"type": "eq", "fun": lambda z: M @ z - theta, "jac": lambda z: M}],
        options={"maxiter": 1000, "ftol": 1e-14},
    )
    if not res.success and res.status != 9:
        raise SolverError(f"SLSQP failed: {res.message}")
    return np.clip(res.x, 0.0, None), {
        "backend": "slsqp",
        "status": "optimal" if res.success else "max_iter",
        "iterations": int(res.nit),
        "objective": float(-res.fun),
    }


def _merge_coincident(phi: FloatArray, etas: FloatArray, tol: float) -> tuple[FloatArray, FloatArray]:
    out_phi: list[float] = []
    out_eta: list[FloatArray] = []
    for p, e in zip(phi, etas):
        for k, q in enumerate(out_eta):
            if np.max(np.abs(e - q)) <= tol:
                total = out_phi[k] + p
                out_eta[k] = (out_phi[k] * q + p * e) / total
                out_phi[k] = total
                break
        else:
            out_phi.append(float(p))
            out_eta.append(np.asarray(e, dtype=float))
    return np.array(out_phi), np.array(out_eta)


def _refit_weights(etas: FloatArray, theta: FloatArray, phi0: FloatArray) -> FloatArray:
    """Smallest change to ``phi0`` that makes the posteriors average exactly to ``theta``.

    Falls back to nnls when the minimum-norm correction leaves the orthant.
    Posterior sets larger than ``n`` are not unique representations, so a
    bare nnls fit could move mass away from the solver's choice.
    """
    E = etas.T
    delta = np.linalg.lstsq(E, theta - E @ phi0, rcond=None)[0]
    phi = phi0 + delta
    if phi.min() < -1e-12:
        phi, _ = nnls(E, theta)
    phi = np.clip(phi, 0.0, None)
    return phi / phi.sum()


def _finalize(instance: SingleTypeInstance, phi: FloatArray, etas: FloatArray, diag: dict) -> SolveReport:
    phi, etas = _merge_coincident(phi, etas, MERGE_POSTERIOR_TOL)
    etas = etas / etas.sum(axis=1, keepdims=True)
    phi = _refit_weights(etas, instance.theta, phi / phi.sum())
    keep = phi > 0.0
    decomp = PosteriorDecomposition(phi[keep], etas[keep])
    if len(decomp) > instance.problem.n_states:
        decomp = reduce_signals(instance, decomp)
        diag["reduced_signals"] = True
    rule = decomposition_to_rule(instance, decomp)
    decomp = rule_to_decomposition(instance, rule)
    revenue = evaluate_rule_single(instance, rule)
    diag["max_constraint_violation"] = float(np.max(np.abs(decomp.barycenter() - instance.theta)))
    diag["decomposition_revenue"] = decomp.revenue(instance)
    check = check_optimality_conditions(instance, decomp)
    diag["merge_check"] = "pass" if not check.merge_flags else "fail"
    diag["sparsity_check"] = "pass" if not check.sparsity_flags else "fail"
    diag["n_signals"] = rule.n_signals
    return SolveReport(revenue, decomp, rule, diag)


def build_program(instance: SingleTypeInstance, *, cap: int = DEFAULT_BASIS_CAP) -> tuple[SegmentProgram, SegmentSet]:
    vs = all_vertices(instance.problem, cap=cap)
    segments = build_segments(instance, vs)
    return SegmentProgram.from_segments(segments), segments


def solve_concave_closure(
    instance: SingleTypeInstance, *, backend: str = "auto", cap: int = DEFAULT_BASIS_CAP
) -> SolveReport:
    """Revenue-optimal rule for the targeted type via the segment program.

    ``backend`` is ``"conic"`` (Clarabel through cvxpy), ``"slsqp"`` (scipy,
    no conic solver needed) or ``"auto"`` (conic when cvxpy imports).
    """
    start = time.perf_counter()
    prog, segments = build_program(instance, cap=cap)
    if backend == "auto":
        try:
            import cvxpy  # noqa: F401

            backend = "conic"
        except ImportError:  # pragma: no cover - depends on environment
            backend = "slsqp"
    if backend == "conic":
        gamma, diag = _solve_conic(prog, instance.theta)
    elif backend == "slsqp":
        gamma, diag = _solve_slsqp(prog, instance.theta)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    diag.update(
        n_vertices=prog.n_vertices,
        n_pairs=len(segments.pairs),
        n_cone_pairs=prog.n_pairs,
        program_violation=float(np.max(np.abs(prog.barycenter(gamma) - instance.theta))),
        geometry=segments.vertex_set.diagnostics,
    )
    phi, etas = prog.posteriors(gamma)
    if phi.size == 0:
        raise SolverError("solver returned no active segment")
    report = _finalize(instance, phi, etas, diag)
    report.diagnostics["seconds"] = time.perf_counter() - start
    return report


def _drops(phi: FloatArray, alpha: FloatArray) -> int:
    neg = alpha < -1e-15
    if not np.any(neg):
        return -1
    ratios = phi[neg] / -alpha[neg]
    return int(np.sum(ratios <= ratios.min() * (1 + 1e-9)))


def _reduction_direction(phi: FloatArray, alpha: FloatArray, fvals: FloatArray) -> FloatArray:
    """Sign of the null direction: revenue first, then fewest parts zeroed at once."""
    slope = float(fvals @ alpha)
    if abs(slope) > 1e-12 * max(1.0, float(np.abs(fvals).max())):
        alpha = alpha if slope > 0.0 else -alpha
        return alpha if _drops(phi, alpha) > 0 else -alpha
    up, down = _drops(phi, alpha), _drops(phi, -alpha)
    if up < 0 or (down > 0 and down < up):
        return -alpha
    return alpha


def reduce_signals(instance: SingleTypeInstance, decomp: PosteriorDecomposition) -> PosteriorDecomposition:
    """Eliminate linearly dependent posteriors until at most ``n_states`` remain.

    Each step moves mass along a null direction of the posterior matrix, which
    keeps ``sum phi eta`` fixed; the direction sign is chosen so revenue does
    not decrease.
    """
    n = instance.problem.n_states
    phi = decomp.phi.copy()
    etas = decomp.etas.copy()
    keep = phi > 0.0
    phi, etas = phi[keep], etas[keep]
    while phi.size > n:
        _, _, vt = np.linalg.svd(etas.T)
        fvals = instance.f(etas)
        alpha = _reduction_direction(phi, vt[-1], fvals)
        neg = alpha < -1e-15
        ratios = phi[neg] / -alpha[neg]
        k = int(np.argmin(ratios))
        phi = phi + ratios[k] * alpha
        phi[np.flatnonzero(neg)[k]] = 0.0
        phi = np.clip(phi, 0.0, None)
        keep = phi > 1e-15
        phi, etas = phi[keep], etas[keep]
    return PosteriorDecomposition(phi / phi.sum(), etas)


def merge_gain(instance: SingleTypeInstance, decomp: PosteriorDecomposition, s_index: int, t_index: int) -> float:
    """Exact revenue change from merging parts ``s_index`` and ``t_index``."""
    phi, etas = decomp.phi, decomp.etas
    for idx in (s_index, t_index):
        if not 0 <= idx < len(decomp):
            raise IndexError(f"part {idx} out of range")
    ps, pt = phi[s_index], phi[t_index]
    if ps <= 0.0 or pt <= 0.0:
        raise ValidationError("merge_gain needs parts with positive probability")
    pv = ps + pt
    merged = (ps * etas[s_index] + pt * etas[t_index]) / pv
    return float(pv * instance.f(merged) - ps * instance.f(etas[s_index]) - pt * instance.f(etas[t_index]))


def merge_gain_bound(instance: SingleTypeInstance, decomp: PosteriorDecomposition, s_index: int, t_index: int) -> float:
    """Lower bound ``-(phi_s phi_t / phi_v) (R_s - R_t)(C_s - C_t)`` on :func:`merge_gain`."""
    ps, pt = decomp.phi[s_index], decomp.phi[t_index]
    es, et = decomp.etas[s_index], decomp.etas[t_index]
    return float(-(ps * pt / (ps + pt)) * (instance.R(es) - instance.R(et)) * (instance.C(es) - instance.C(et)))


def check_optimality_conditions(
    instance: SingleTypeInstance, decomp: PosteriorDecomposition, *, tol: float = MERGE_GAIN_TOL
) -> OptimalityReport:
    limit = 2 * instance.problem.n_actions
    report = OptimalityReport(sparsity_limit=limit)
    m = len(decomp)
    for s in range(m):
        for t in range(s + 1, m):
            if decomp.phi[s] <= 0.0 or decomp.phi[t] <= 0.0:
                continue
            gain = merge_gain(instance, decomp, s, t)
            if gain > tol:
                report.merge_flags.append((s, t, gain))
    for s, eta in enumerate(decomp.etas):
        if np.count_nonzero(eta > SPARSITY_TOL) > limit:
            report.sparsity_flags.append(s)
    return report


def no_disclosure_revenue(instance: SingleTypeInstance) -> float:
    """Revenue of charging ``C(theta)`` for full revelation with no advertising."""
    return float(instance.C(instance.theta))


def vertex_decomposition(instance: SingleTypeInstance) -> PosteriorDecomposition:
    """Split ``theta`` over the vertices of the polytope of its best action.

    ``C`` is linear on that polytope, so with a common prior the revenue is
    ``C(theta)`` while every posterior has at most ``|A|`` nonzero entries.
    """
    a = best_action(instance.problem, instance.theta)
    vs = all_vertices(instance.problem)
    pts = np.array([v.point for v in vs.vertices if a in v.actions])
    pts = np.array([p for p in pts if in_polytope(instance.problem, p, a)])
    q, resid = nnls(pts.T, instance.theta)
    if resid > 1e-8:
        raise SolverError(f"theta not spanned by the vertices of its polytope (residual {resid:.3g})")
    keep = q > 1e-12
    decomp = PosteriorDecomposition(q[keep] / q[keep].sum(), pts[keep])
    if len(decomp) > instance.problem.n_states:
        decomp = reduce_signals(instance, decomp)
    return decomp


# --- binary state -----------------------------------------------------------


@dataclass(frozen=True)
class CostPiece:
    left: float
    right: float
    intercept: float
    slope: float


def cost_curve(instance: SingleTypeInstance) -> list[CostPiece]:
    """Pieces of ``C(x) = min_a [r(1, a) + x (r(0, a) - r(1, a))]`` on ``[0, 1]``, ``x = eta_0``."""
    regret = instance.problem.regret
    b = regret[1]
    m = regret[0] - regret[1]
    order = np.lexsort((m, b))
    cur = int(order[0])
    x = 0.0
    pieces: list[CostPiece] = []
    while True:
        cand = np.flatnonzero(m < m[cur])
        nxt, nxt_x = None, 1.0
        for a in cand:
            xi = (b[a] - b[cur]) / (m[cur] - m[a])
            if xi <= x:
                continue
            if xi < nxt_x - 1e-15 or (abs(xi - nxt_x) <= 1e-15 and nxt is not None and m[a] < m[nxt]):
                nxt, nxt_x = int(a), float(xi)
        pieces.append(CostPiece(x, nxt_x, float(b[cur]), float(m[cur])))
        if nxt is None:
            break
        cur, x = nxt, nxt_x
    return pieces


def _belief(x: float) -> FloatArray:
    return np.array([x, 1.0 - x])


def solve_binary(instance: SingleTypeInstance) -> SolveReport:
    """Closed-form optimum for two states.

    The optimum splits ``theta`` into at most two posteriors: a turning point
    of the cost curve and either another turning point or a tangency point on
    a piece where ``f = R C`` is a concave quadratic.  Every such candidate is
    enumerated, so the work is quadratic in the number of actions.
    """
    if instance.problem.n_states != 2:
        raise ValidationError("solve_binary requires exactly two states")
    start = time.perf_counter()
    w = instance.ratio_weights
    r0, r1 = w[1], w[0] - w[1]
    pieces = cost_curve(instance)
    knots = [pieces[0].left] + [p.right for p in pieces]
    fk = [float(instance.f(_belief(k))) for k in knots]
    xt = float(instance.theta[0])

    best_val = float(instance.f(instance.theta))
    best: tuple[float, float] | None = None

    def consider(val: float, v: float, t: float) -> None:
        nonlocal best_val, best
        if val > best_val + 1e-14:
            best_val, best = val, (v, t)

    for a_idx in range(len(knots)):
        for b_idx in range(a_idx + 1, len(knots)):
            v, u = knots[a_idx], knots[b_idx]
            if v < xt < u:
                lam = (u - xt) / (u - v)
                consider(lam * fk[a_idx] + (1 - lam) * fk[b_idx], v, u)

    for piece in pieces:
        qa = r1 * piece.slope
        if qa > 1e-15:
            continue  # convex piece: only its endpoints can touch the closure
        qb = r0 * piece.slope + r1 * piece.intercept
        qc = r0 * piece.intercept

        def q(t: float) -> float:
            return (qa * t + qb) * t + qc

        for v, fv in zip(knots, fk):
            if v < xt:
                lo, hi = max(piece.left, xt), piece.right
            elif v > xt:
                lo, hi = piece.left, min(piece.right, xt)
            else:
                continue
            if lo > hi:
                continue
            cands = [lo, hi]
            if qa < -1e-15:
                # tangency through (v, f(v)):  qa t^2 - 2 qa v t + (fv - qc - qb v) = 0
                disc = (2 * qa * v) ** 2 - 4 * qa * (fv - qc - qb * v)
                if disc >= 0.0:
                    sq = np.sqrt(disc)
                    cands += [(2 * qa * v + sq) / (2 * qa), (2 * qa * v - sq) / (2 * qa)]
            for t in cands:
                if lo <= t <= hi and t != v:
                    consider(fv + (xt - v) * (q(t) - fv) / (t - v), v, t)

    if best is None:
        phi, etas = np.array([1.0]), instance.theta[None, :]
    else:
        v, t = best
        lam = (t - xt) / (t - v)
        phi = np.array([lam, 1.0 - lam])
        etas = np.array([_belief(v), _belief(t)])
        keep = phi > ACTIVE_TOL
        phi, etas = phi[keep], etas[keep]
    diag = {"backend": "binary", "status": "optimal", "iterations": 0, "objective": best_val, "n_pieces": len(pieces)}
    report = _finalize(instance, phi, etas, diag)
    report.diagnostics["seconds"] = time.perf_counter() - start
    return report
