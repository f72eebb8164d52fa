"""Optimal-transport distance between periodic H^1 profiles.

A profile ``u`` is lifted to the measure with density ``1 + ux^2`` on the
curve ``x -> (x, u(x), 2 arctan ux(x))``. A transport plan is a strictly
increasing, piecewise-linear map ``psi`` with ``psi(x + 1) = psi(x) + 1``.
The cost of a plan adds the transported mass times the capped point
distance and the mass left untransported. Only upper bounds (best plan
found) and the certified L1 lower bound are computed; the exact infimum
is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .kernel import PeakonState, h1_norm, h1_distance, panel_breaks, panel_nodes, profile

TWO_PI = 2.0 * math.pi
# sample points per panel when hunting kinks of the cost integrand
_SCAN = 17


@dataclass(frozen=True)
class LiftedPoint:
    x: float
    u: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(np.mod(self.theta, TWO_PI)))


def arc_distance(a, b):
    d = np.mod(np.abs(np.asarray(a, dtype=float) - b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def d_diamond(a: LiftedPoint, b: LiftedPoint) -> float:
    """Capped sum of position, value and angle distances."""
    return float(min(1.0, abs(a.x - b.x) + abs(a.u - b.u) + arc_distance(a.theta, b.theta)))


# ---------------------------------------------------------------------------
# transport plans


@dataclass(frozen=True)
class TransportPlan:
    """Piecewise-linear periodic plan through ``(x[k], y[k])``.

    One period is ``[x[0], x[0] + 1)``; the wrap pair ``(x[0] + 1, y[0] + 1)``
    is implicit.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).copy()
        if x.shape != y.shape or x.ndim != 1 or len(x) == 0:
            raise ValueError("plan breakpoints must be equal-length 1-d arrays")
        X, Y = np.append(x, x[0] + 1.0), np.append(y, y[0] + 1.0)
        if np.any(np.diff(X) <= 0) or np.any(np.diff(Y) <= 0):
            raise ValueError("plan must be strictly increasing within one period")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def breakpoints(self):
        pts = list(zip(self.x.tolist(), self.y.tolist()))
        return pts + [(self.x[0] + 1.0, self.y[0] + 1.0)]

    def _ext(self):
        return np.append(self.x, self.x[0] + 1.0), np.append(self.y, self.y[0] + 1.0)

    def __call__(self, xs):
        xs = np.asarray(xs, dtype=float)
        n = np.floor(xs - self.x[0])
        X, Y = self._ext()
        return np.interp(xs - n, X, Y) + n

    def slope(self, xs):
        """Right derivative of the plan."""
        xs = np.asarray(xs, dtype=float)
        r = xs - np.floor(xs - self.x[0])
        X, Y = self._ext()
        k = np.clip(np.searchsorted(X, r, side="right") - 1, 0, len(self.x) - 1)
        return (Y[k + 1] - Y[k]) / (X[k + 1] - X[k])

    def inverse(self) -> "TransportPlan":
        return TransportPlan(self.y, self.x)


def plan_identity() -> TransportPlan:
    return TransportPlan([0.0], [0.0])


def plan_uniform(n: int) -> TransportPlan:
    """Identity plan carrying n equispaced breakpoints."""
    g = np.arange(n) / n
    return TransportPlan(g, g)


def plan_inverse(psi: TransportPlan) -> TransportPlan:
    return psi.inverse()


def _dedupe(x, tol=1e-14):
    x = np.sort(x)
    keep = np.append(True, np.diff(x) > tol)
    return x[keep]


def plan_compose(a: TransportPlan, b: TransportPlan) -> TransportPlan:
    """The plan ``a o b`` (apply b first)."""
    x0 = b.x[0]
    binv = b.inverse()
    ya = a.x  # breakpoints of a, to be pulled back through b
    pulled = binv(ya)
    pulled = pulled - np.floor(pulled - x0)
    xs = _dedupe(np.concatenate([b.x, pulled]))
    xs = xs[xs < x0 + 1.0 - 1e-14]
    return TransportPlan(xs, a(b(xs)))


# ---------------------------------------------------------------------------
# cost


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    transport: float
    excess: float


def _terms(u: PeakonState, v: PeakonState, psi: TransportPlan, x):
    """Integrands and kink indicators of the plan cost at points x."""
    x = np.asarray(x, dtype=float)
    uu, ux = profile(u, x)
    y = psi(x)
    vv, vx = profile(v, y)
    dpos = x - y
    dval = uu - vv
    dth = 2.0 * np.arctan(ux) - 2.0 * np.arctan(vx)
    arc = np.minimum(np.abs(dth), TWO_PI - np.abs(dth))
    dsum = np.abs(dpos) + np.abs(dval) + arc
    mu = 1.0 + ux * ux
    mv = (1.0 + vx * vx) * psi.slope(x)
    transport = np.minimum(dsum, 1.0) * np.minimum(mu, mv)
    excess = np.abs(mu - mv)
    switches = np.stack([dpos, dval, dth, np.abs(dth) - math.pi, dsum - 1.0, mu - mv])
    return transport, excess, switches


def _cost_breaks(u, v, psi, max_width):
    pre = psi.inverse()(v.q) if len(v) else np.zeros(0)
    return panel_breaks(u.q, pre, psi.x, max_width=max_width)


def _refine(u, v, psi, breaks):
    """Insert every kink of the cost integrand located inside the panels."""
    a, b = breaks[:-1], breaks[1:]
    s = np.linspace(0.0, 1.0, _SCAN)
    s[0], s[-1] = 1e-11, 1.0 - 1e-11
    pts = a[:, None] + (b - a)[:, None] * s
    _, _, sw = _terms(u, v, psi, pts.ravel())
    sw = sw.reshape(sw.shape[0], *pts.shape)
    change = np.sign(sw[..., :-1]) * np.sign(sw[..., 1:]) < 0
    # a kink sitting exactly on a scan point shows up as a zero, not a sign change
    panel, j = np.nonzero(np.any(sw[..., 1:-1] == 0.0, axis=0))
    roots = list(pts[panel, j + 1])
    for k, panel, j in zip(*np.nonzero(change)):
        lo, hi = pts[panel, j], pts[panel, j + 1]

        def f(t, k=k):
            return _terms(u, v, psi, np.array([t]))[2][k, 0]

        roots.append(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    roots += _close_root_pairs(u, v, psi, pts, sw)
    if not roots:
        return breaks
    return _dedupe(np.concatenate([breaks, roots]), tol=1e-15)


def _close_root_pairs(u, v, psi, pts, sw):
    """Roots that come in pairs between two scan points, invisible to a sign test.

    A parabola through each triple of samples locates possible dips; where its
    vertex comes close to zero the signed switch is minimized over the triple.
    """
    a = np.abs(sw)
    y0, y1, y2 = a[..., :-2], a[..., 1:-1], a[..., 2:]
    sg = np.sign(sw[..., 1:-1])
    same = (np.sign(sw[..., :-2]) == sg) & (np.sign(sw[..., 2:]) == sg) & (sg != 0)
    curv = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        at = (y0 - y2) / (2.0 * curv)  # vertex offset from the middle sample, in steps
        vertex = y1 - (y2 - y0) ** 2 / (8.0 * curv)
    lo_ok = np.full(at.shape[-1], -0.5)
    hi_ok = np.full(at.shape[-1], 0.5)
    lo_ok[0], hi_ok[-1] = -1.0, 1.0
    near = same & (curv > 0) & (at >= lo_ok) & (at <= hi_ok) & (vertex < 0.5 * np.minimum(y0, y2))
    out = []
    for k, panel, j in zip(*np.nonzero(near)):
        lo, hi = pts[panel, j], pts[panel, j + 2]
        sgn = sg[k, panel, j]

        def g(t, k=k):
            return _terms(u, v, psi, np.array([t]))[2][k, 0]

        res = minimize_scalar(lambda t: sgn * g(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        if res.fun < 0:
            tol = dict(xtol=1e-15, rtol=4 * np.finfo(float).eps)
            out += [brentq(g, lo, res.x, **tol), brentq(g, res.x, hi, **tol)]
    return out


def transport_cost(u: PeakonState, v: PeakonState, psi: TransportPlan,
                   accurate: bool = True) -> CostBreakdown:
    """Cost of moving the lifted measure of u onto that of v along psi.

    ``accurate`` splits the quadrature at every kink of the integrand (caps,
    absolute values, the mass split); otherwise a fixed fine panel grid is
    used, which is what the optimizer calls in its inner loop.
    """
    breaks = _cost_breaks(u, v, psi, 1 / 16 if accurate else 1 / 32)
    if accurate:
        breaks = _refine(u, v, psi, breaks)
    x, w = panel_nodes(breaks)
    tr, ex, _ = _terms(u, v, psi, x)
    t1, t2 = float(w @ tr), float(w @ ex)
    return CostBreakdown(total=t1 + t2, transport=t1, excess=t2)


def phi_pair(u: PeakonState, v: PeakonState, psi: TransportPlan, x: float):
    """Mass fractions ``(phi1(x), phi2(psi(x)))`` kept by the plan at x."""
    _, ux = profile(u, float(x))
    _, vx = profile(v, float(psi(x)))
    ratio = float((1.0 + vx * vx) * psi.slope(x) / (1.0 + ux * ux))
    return min(1.0, ratio), min(1.0, 1.0 / ratio)


# ---------------------------------------------------------------------------
# norms and bounds


def l1_distance(u: PeakonState, v: PeakonState) -> float:
    breaks = panel_breaks(u.q, v.q, max_width=1 / 16)
    a, b = breaks[:-1], breaks[1:]
    s = np.linspace(1e-11, 1 - 1e-11, _SCAN)
    pts = a[:, None] + (b - a)[:, None] * s

    def diff(x):
        return profile(u, x)[0] - profile(v, x)[0]

    d = diff(pts)
    roots = [brentq(lambda t: float(diff(t)), pts[i, j], pts[i, j + 1], xtol=1e-15)
             for i, j in zip(*np.nonzero(d[:, :-1] * d[:, 1:] < 0))]
    x, w = panel_nodes(_dedupe(np.concatenate([breaks, roots]), 1e-15))
    return float(w @ np.abs(diff(x)))


def lower_bound_L1(u: PeakonState, v: PeakonState) -> float:
    """Certified lower bound ``||u - v||_L1 / (2 (2 + ||u||_H1 + ||v||_H1))``."""
    return l1_distance(u, v) / (2.0 * (2.0 + h1_norm(u) + h1_norm(v)))


UPPER_H1_CONSTANT = 8.0 * math.pi + 3.0


def upper_bound_H1(u: PeakonState, v: PeakonState) -> float:
    """``(8 pi + 3)(1 + ||u|| + ||v||) ||u - v||_H1``, an upper bound via the identity plan."""
    return UPPER_H1_CONSTANT * (1.0 + h1_norm(u) + h1_norm(v)) * h1_distance(u, v)


# ---------------------------------------------------------------------------
# canonical plans


class _MassCDF:
    """Exact cumulative mass ``M(x) = int_0^x (1 + ux^2)`` of a multipeakon.

    Between kinks ``ux = A e^x + B e^-x``, so every panel integrates in
    closed form.
    """

    def __init__(self, s: PeakonState):
        self.breaks = panel_breaks(s.q)
        mids = 0.5 * (self.breaks[:-1] + self.breaks[1:])
        c = 1.0 / (math.e - 1.0)
        if len(s):
            n = np.floor(mids[:, None] - s.q)  # image index per panel and peakon
            sh = s.q + n
            self.A = c * (np.exp(-sh) * s.p).sum(axis=1)
            self.B = -c * (np.exp(1.0 + sh) * s.p).sum(axis=1)
        else:
            self.A = self.B = np.zeros(len(mids))
        self.cum = np.concatenate([[0.0], np.cumsum(self._F(self.breaks[1:], np.arange(len(mids)))
                                                    - self._F(self.breaks[:-1], np.arange(len(mids))))])
        self.total = float(self.cum[-1])
        self._table = None

    def _F(self, x, k):
        A, B = self.A[k], self.B[k]
        return x + 0.5 * A * A * np.exp(2 * x) + 2 * A * B * x - 0.5 * B * B * np.exp(-2 * x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = np.floor(x)
        r = x - n
        k = np.clip(np.searchsorted(self.breaks, r, side="right") - 1, 0, len(self.A) - 1)
        return self.cum[k] + self._F(r, k) - self._F(self.breaks[k], k) + n * self.total

    def density(self, x):
        x = np.asarray(x, dtype=float)
        r = x - np.floor(x)
        k = np.clip(np.searchsorted(self.breaks, r, side="right") - 1, 0, len(self.A) - 1)
        ux = self.A[k] * np.exp(r) + self.B[k] * np.exp(-r)
        return 1.0 + ux * ux

    def inverse(self, m):
        """Solve ``M(x) = m``: table lookup, then safeguarded Newton steps."""
        if self._table is None:
            xs = np.unique(np.concatenate([self.breaks, np.linspace(0, 1, 513)]))
            self._table = (xs, self(xs))
        m = np.asarray(m, dtype=float)
        n = np.floor(m / self.total)
        r = m - n * self.total
        xs, ms = self._table
        k = np.clip(np.searchsorted(ms, r, side="right") - 1, 0, len(xs) - 2)
        lo, hi = xs[k], xs[k + 1]
        x = lo + (r - ms[k]) / (ms[k + 1] - ms[k]) * (hi - lo)
        for _ in range(8):
            x = np.clip(x - (self(x) - r) / self.density(np.minimum(x, hi - 1e-15)), lo, hi)
        return x + n


def _matched(mu, mv, c, x):
    """Plan value at x when psi(0) = c: exact cumulative match up to the mass
    ``2 min - max`` and an affine tail after it (proportional match when the
    masses are too different for that)."""
    tu, tv = mu.total, mv.total
    e = 2.0 * min(tu, tv) - max(tu, tv)
    m0 = mv(c)
    mx = mu(x)
    if e <= 0:
        return mv.inverse(m0 + mx * tv / tu)
    xs = mu.inverse(e)
    ys = mv.inverse(m0 + e)
    head = mv.inverse(m0 + np.minimum(mx, e))
    if xs >= 1.0:
        return head
    theta = (x - xs) / (1.0 - xs)
    tail = ys + theta * (c + 1.0 - ys)
    return np.where(mx <= e, head, tail)


def plan_cdf_match(u: PeakonState, v: PeakonState, grid: int = 64) -> TransportPlan:
    """Monotone plan matching the cumulative masses of u and v on a grid.

    The circle anchor ``psi(0)`` minimizes the mean displacement
    ``mean |psi(x) - x|`` over the grid.
    """
    mu, mv = _MassCDF(u), _MassCDF(v)
    tu, tv = mu.total, mv.total
    e = 2.0 * min(tu, tv) - max(tu, tv)
    xs = np.arange(grid) / grid
    if e > 0:
        xs = _dedupe(np.append(xs, mu.inverse(e)))
        xs = xs[xs < 1.0 - 1e-12]

    def displacement(c):
        return float(np.mean(np.abs(_matched(mu, mv, c, xs) - xs)))

    cs = np.arange(-16, 17) / 32
    vals = [displacement(c) for c in cs]
    k = int(np.argmin(vals))
    lo, hi = cs[max(k - 1, 0)], cs[min(k + 1, len(cs) - 1)]
    gr = (math.sqrt(5) - 1) / 2
    for _ in range(30):
        c1, c2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
        if displacement(c1) <= displacement(c2):
            hi = c2
        else:
            lo = c1
    c = 0.5 * (lo + hi)
    if displacement(cs[k]) < displacement(c):
        c = cs[k]
    ys = _matched(mu, mv, c, xs)
    keep = np.append(True, np.diff(ys) > 1e-14)
    return TransportPlan(xs[keep], ys[keep])


def plan_flow(traj, s: float, s2: float, grid: int = 64) -> TransportPlan:
    """Plan ``x -> xi(s2; s, x)`` moving mass along the characteristics of one solution."""
    from .dynamics import characteristic_flow

    xs = np.arange(grid) / grid
    return TransportPlan(xs, characteristic_flow(traj, s, s2, xs))


def plan_characteristic(traj_u, traj_v, psi0: TransportPlan, t: float, t0: float = 0.0,
                        grid: int = 64) -> TransportPlan:
    """Push psi0 forward along both flows: ``psi_t(xi(t, y)) = zeta(t, psi0(y))``."""
    from .dynamics import characteristic_flow

    ys = _dedupe(np.concatenate([psi0.x, psi0.x[0] + np.arange(grid) / grid]))
    ys = ys[ys < psi0.x[0] + 1.0 - 1e-14]
    xi = characteristic_flow(traj_u, t0, t, ys)
    zeta = characteristic_flow(traj_v, t0, t, psi0(ys))
    return TransportPlan(xi, zeta)


# ---------------------------------------------------------------------------
# optimization


@dataclass
class MetricReport:
    upper: float
    lower: float
    best_plan: TransportPlan
    breakdown: CostBreakdown
    seed_index: int = 0
    history: list = field(default_factory=list)


def _corrected(seed: TransportPlan, knots: np.ndarray, vals: np.ndarray) -> TransportPlan:
    return plan_compose(TransportPlan(knots, vals), seed)


def optimize_plan(u: PeakonState, v: PeakonState, seeds: Sequence[TransportPlan],
                  budget: int = 2, knots: int = 8, golden_iters: int = 12) -> MetricReport:
    """Deterministic coordinate descent on a correction of each seed plan.

    Each seed is composed with a piecewise-linear correction ``c`` having
    ``knots`` breakpoints in the target coordinate; the sweep visits the
    knot values in order and golden-section searches each one between its
    neighbours. ``budget`` is the number of sweeps. The returned upper
    bound never exceeds the accurate cost of any seed.
    """
    if not seeds:
        raise ValueError("optimize_plan needs at least one seed")
    best = None
    history = []
    gr = (math.sqrt(5) - 1) / 2
    for idx, seed in enumerate(seeds):
        cb = transport_cost(u, v, seed)
        if best is None or cb.total < best[0].total:
            best = (cb, seed, idx)
        history.append(best[0].total)
        if cb.total == 0.0 or budget <= 0:
            continue
        base = seed.y[0] + np.arange(knots) / knots
        vals = base.copy()

        def fast(vs):
            return transport_cost(u, v, _corrected(seed, base, vs), accurate=False).total

        cur = fast(vals)
        for _ in range(budget):
            for k in range(knots):
                lo = vals[k - 1] if k > 0 else vals[-1] - 1.0
                hi = vals[k + 1] if k < knots - 1 else vals[0] + 1.0
                pad = 1e-6 * (hi - lo)
                a, b = lo + pad, hi - pad
                trial = vals.copy()

                def f(val):
                    trial[k] = val
                    return fast(trial)

                c1, c2 = b - gr * (b - a), a + gr * (b - a)
                f1, f2 = f(c1), f(c2)
                for _ in range(golden_iters):
                    if f1 <= f2:
                        b, c2, f2 = c2, c1, f1
                        c1 = b - gr * (b - a)
                        f1 = f(c1)
                    else:
                        a, c1, f1 = c1, c2, f2
                        c2 = a + gr * (b - a)
                        f2 = f(c2)
                cand, fc = (c1, f1) if f1 <= f2 else (c2, f2)
                if fc < cur:
                    vals[k], cur = cand, fc
            plan = _corrected(seed, base, vals)
            cb = transport_cost(u, v, plan)
            if cb.total < best[0].total:
                best = (cb, plan, idx)
            history.append(best[0].total)
    cb, plan, idx = best
    return MetricReport(upper=cb.total, lower=lower_bound_L1(u, v), best_plan=plan,
                        breakdown=cb, seed_index=idx, history=history)


def default_seeds(u: PeakonState, v: PeakonState, extra: Optional[Sequence[TransportPlan]] = None):
    seeds = [plan_identity(), plan_cdf_match(u, v)]
    if extra:
        seeds += list(extra)
    return seeds


def j_bounds(u: PeakonState, v: PeakonState, extra=None, budget: int = 2, **kw) -> MetricReport:
    """Lower and upper bound of the transport distance between u and v."""
    return optimize_plan(u, v, default_seeds(u, v, extra), budget=budget, **kw)


# ---------------------------------------------------------------------------
# a-priori constants


def lipschitz_constant(e: float) -> float:
    """Time-Lipschitz constant of ``t -> u(t)`` for the transport distance at energy ``e``."""
    return 2 * (1 + e) + e + (10 * e + 1) + 10 * e * e + 10 * e


def default_kappa_max(e_u: float, e_v: float) -> float:
    """Growth-rate ceiling used when none is configured: the same bracket at the larger energy."""
    return lipschitz_constant(max(e_u, e_v))
