"""Named verification suites. Each returns a list of Verdicts."""

from __future__ import annotations

import math

import numpy as np

from .. import approx as ap
from .. import dynamics as dy
from .. import kernel as kn
from .. import metric as mt
from .scenario import Verdict

# ---------------------------------------------------------------------------
# random data


def random_state(rng, n_max=5, p_max=2.0, min_gap=0.05, n_min=1, positive=False):
    """Random multipeakon with N in [n_min, n_max] and well separated positions."""
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        q = rng.uniform(0.0, 1.0, n)
        if n < 2 or kn.PeakonState(np.ones(n), q).min_gap() >= min_gap:
            break
    lo = 0.1 if positive else -p_max
    p = rng.uniform(lo, p_max, n)
    return kn.PeakonState(p, q)


def random_pairs(size, seed, n_max=5):
    rng = np.random.default_rng(seed)
    return [(random_state(rng, n_max, min_gap=1e-3), random_state(rng, n_max, min_gap=1e-3))
            for _ in range(size)]


def regular_sample(rng, size, t_final, cfg, **kw):
    """``size`` states whose evolution succeeds; returns (trajectories, redraws)."""
    out, redraws = [], 0
    while len(out) < size:
        s = random_state(rng, **kw)
        try:
            out.append((s, dy.evolve(s, t_final, cfg)))
        except dy.PeakonError:
            redraws += 1
    return out, redraws


THREE_POSITIVE = kn.PeakonState([1.0, 0.6, 0.8], [0.1, 0.45, 0.7])
PEAKON_ANTIPEAKON = kn.PeakonState([1.0, -1.0], [0.4, 0.6])


def _v(suite, name, measured, bound, constant=float("nan"), detail=""):
    return Verdict(suite, name, float(constant), float(measured), float(bound), detail)


# ---------------------------------------------------------------------------
# kernel


def _second_difference(f, x, h=0.05, levels=4):
    """Central second difference refined by Richardson extrapolation."""
    table = []
    for k in range(levels):
        hk = h / 2 ** k
        table.append((f(x + hk) - 2 * f(x) + f(x - hk)) / hk ** 2)
    for m in range(1, levels):
        fac = 4.0 ** m
        table = [(fac * table[k + 1] - table[k]) / (fac - 1) for k in range(len(table) - 1)]
    return table[0]


def suite_kernel(size=100, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.1, 0.9, size)
    res = np.abs(_second_difference(kn.chi, x) - kn.chi(x)).max()
    jump = kn.chi_prime(0.0) - kn.chi_prime(np.nextafter(1.0, 0.0))
    xs = rng.uniform(-3, 3, size)
    tilde = np.abs(kn.chi_tilde(xs) + kn.chi_prime(xs)).max()
    n = np.arange(-40, 41)
    series = np.array([np.exp(-np.abs(v - n)).sum() for v in xs])
    period = np.abs(series - kn.chi(xs)).max()
    states = [random_state(rng, min_gap=1e-3) for _ in range(20)]
    sup = max(np.abs(kn.profile(s, np.linspace(0, 1, 401))[0]).max() / (2 * math.sqrt(kn.energy(s)))
              for s in states)
    pts = np.linspace(0, 1, 7)
    src = max(max(np.abs(kn.source_P(s, pts)).max(), np.abs(kn.source_Px(s, pts)).max()) / kn.energy(s)
              for s in states[:5])
    return [
        _v("kernel", "chi''=chi off the integers", res, 1e-10),
        _v("kernel", "chi' jump at integers equals -2", abs(jump + 2.0), 1e-15),
        _v("kernel", "chi_tilde=-chi'", tilde, 1e-14),
        _v("kernel", "chi matches the periodized exponential", period, 1e-12),
        _v("kernel", "sup|u| <= 2 sqrt(E)", sup, 1.0, 2.0),
        _v("kernel", "|P|,|Px| <= E", src, 1.0, 1.0),
    ]


# ---------------------------------------------------------------------------
# dynamics


def conservation_drift(traj):
    """Largest relative change of H and largest change of the total momentum."""
    h0 = traj.hamiltonian_at(traj.samples[0][0])
    m0 = dy.momentum(traj.samples[0][1])
    dh = max(abs(traj.hamiltonian_at(t) - h0) for t in traj.times) / (1 + abs(h0))
    dm = max(abs(dy.momentum(s) - m0) for _, s in traj.samples)
    return dh, dm


def suite_conservation(size=50, seed=0):
    cfg = dy.SolverConfig()
    runs, redraws = regular_sample(np.random.default_rng(seed), size, 1.0, cfg)
    drifts = [conservation_drift(tr) for _, tr in runs]
    events = sum(len(tr.events) for _, tr in runs)
    detail = f"{size} states, {redraws} redrawn, {events} collisions"
    return [
        _v("conservation", "hamiltonian drift |dH|/(1+|H0|)", max(d[0] for d in drifts), 1e-8, detail=detail),
        _v("conservation", "momentum drift |d sum p|", max(d[1] for d in drifts), 1e-8, detail=detail),
    ]


def collision_report(t_final=3.0):
    """Measurements on the symmetric peakon-antipeakon collision."""
    s0 = PEAKON_ANTIPEAKON
    traj = dy.evolve(s0, t_final)
    out = {"events": len(traj.events), "traj": traj}
    if not traj.events:
        return out
    ev = traj.events[0]
    windows = [(min(a, b), max(a, b)) for (a, b), k in traj.regime_log if k == "chart"]
    a, b = next(((a, b) for a, b in windows if a <= ev.tau <= b), (ev.tau - 1e-3, ev.tau + 1e-3))
    e_before, e_after = dy.energy_at(traj, a), dy.energy_at(traj, b)
    out["energy_jump"] = abs(e_after - e_before) / e_before
    e0 = kn.energy(s0)
    out["bookkeeping"] = abs(dy.energy_at(traj, ev.tau) + ev.atom - e0) / e0
    x = np.linspace(0, 1, 201)
    ts = np.append(np.linspace(0, t_final, 61), ev.tau)
    odd = 0.0
    for t in ts:
        s = traj.state_at(t)
        odd = max(odd, np.abs(kn.profile(s, x)[0] + kn.profile(s, 2 * ev.qbar - x)[0]).max())
    out["odd"] = odd
    out["qbar"] = ev.qbar
    extrap = dy.extrapolated_atom(traj, ev)
    out["atom_rel"] = abs(ev.atom - extrap) / extrap
    return out


def suite_collision(size=None, seed=0):
    r = collision_report()
    vs = [_v("collision", "exactly one collision event", abs(r["events"] - 1), 0)]
    if r["events"] == 1:
        vs += [
            _v("collision", "collision point at 1/2", abs(r["qbar"] - 0.5), 1e-8),
            _v("collision", "relative energy change across the collision", r["energy_jump"], 1e-4),
            _v("collision", "profile energy plus atom equals initial energy", r["bookkeeping"], 1e-4),
            _v("collision", "odd symmetry about the collision point", r["odd"], 1e-6),
            _v("collision", "atom vs extrapolated gap energy", r["atom_rel"], 0.05),
        ]
    return vs


def suite_residual(size=None, seed=0):
    single = dy.evolve(kn.PeakonState([1.0], [0.3]), 1.0)
    r1 = max(dy.residual_check(single, t) for t in (0.25, 0.5, 0.75))
    three = dy.evolve(THREE_POSITIVE, 1.0)
    r3 = max(dy.residual_check(three, t) for t in (0.25, 0.5, 0.75))
    return [_v("residual", "equation residual, single peakon", r1, 1e-4),
            _v("residual", "equation residual, three peakons", r3, 1e-3)]


def suite_reversibility(size=None, seed=0):
    # H1 error of a kink displaced by dq is about 2|p| sqrt(dq), so 1e-6 in H1
    # needs positions to ~1e-13
    tight = dy.SolverConfig(rel_tol=1e-12, abs_tol=1e-14)
    fwd = dy.evolve(THREE_POSITIVE, 0.5, tight)
    back = dy.evolve(fwd.samples[-1][1], 0.0, tight, t0=0.5)
    d0 = kn.h1_distance(back.state_at(0.0), THREE_POSITIVE)
    fwd = dy.evolve(PEAKON_ANTIPEAKON, 2.0)
    back = dy.evolve(fwd.samples[-1][1], 0.0, t0=2.0)
    d1 = kn.h1_distance(back.state_at(0.0), PEAKON_ANTIPEAKON)
    detail = f"{len(fwd.events)} forward and {len(back.events)} backward collisions"
    return [_v("reversibility", "forward-back H1 error, no collision", d0, 1e-6),
            _v("reversibility", "forward-back H1 error, one collision", d1, 1e-4, detail=detail)]


def suite_l2_speed(size=10, seed=0):
    runs, _ = regular_sample(np.random.default_rng(seed), size, 1.0, dy.SolverConfig(),
                             n_max=4, min_gap=0.1)
    worst = 0.0
    for _, tr in runs:
        for t in (0.3, 0.7):
            if tr.in_chart(t) or tr.events_between(t - 1e-3, t + 1e-3):
                continue
            worst = max(worst, dy.l2_speed(tr, t) / dy.l2_speed_bound(tr.state_at(t)))
    return [_v("l2_speed", "||u_t||_L2 <= speed bound", worst, 1.0)]


# ---------------------------------------------------------------------------
# metric


def suite_metric(size=200, seed=0):
    pairs = random_pairs(size + 1, seed)
    ident = sym = tri = 0.0
    for k in range(size):
        u, v = pairs[k]
        w = pairs[k + 1][0]
        ident = max(ident, mt.transport_cost(u, u, mt.plan_identity()).total)
        a = mt.plan_cdf_match(u, v)
        b = mt.plan_cdf_match(v, w)
        cuv = mt.transport_cost(u, v, a).total
        sym = max(sym, abs(cuv - mt.transport_cost(v, u, mt.plan_inverse(a)).total))
        cvw = mt.transport_cost(v, w, b).total
        cuw = mt.transport_cost(u, w, mt.plan_compose(b, a)).total
        tri = max(tri, cuw - cuv - cvw)
    rng = np.random.default_rng(seed + 1)
    a, b = rng.uniform(-100, 100, (2, 10 * size))
    lhs = np.abs(np.arctan(a) - np.arctan(b)) * a * a
    arctan = float(np.max(lhs - 4 * math.pi * (np.abs(a) + np.abs(b)) * np.abs(a - b)))
    pts = rng.uniform(-2, 2, (size, 2, 3))
    cap = max(mt.d_diamond(mt.LiftedPoint(*x), mt.LiftedPoint(*y)) for x, y in pts)
    excess = -min(mt.transport_cost(u, v, mt.plan_identity()).excess for u, v in pairs[:20])
    return [_v("metric", "identity plan cost of u against itself", ident, 0.0),
            _v("metric", "cost symmetry under plan inversion", sym, 1e-10),
            _v("metric", "composed-plan triangle excess", tri, 1e-8),
            _v("metric", "arctan difference inequality", arctan, 0.0, 4 * math.pi),
            _v("metric", "d_diamond capped at 1", cap, 1.0),
            _v("metric", "excess-mass term nonnegative (negated minimum)", excess, 0.0)]


def suite_sandwich(size=200, seed=0, budget=1):
    lo_up = up_h1 = -np.inf
    for u, v in random_pairs(size, seed):
        rep = mt.j_bounds(u, v, budget=budget)
        lo_up = max(lo_up, rep.lower - rep.upper)
        up_h1 = max(up_h1, rep.upper - mt.upper_bound_H1(u, v))
    return [_v("sandwich", "lower L1 bound <= upper bound", lo_up, 0.0),
            _v("sandwich", "upper bound <= H1 bound", up_h1, 0.0, mt.UPPER_H1_CONSTANT)]


def time_lipschitz_report(s=0.2, hs=(1e-3, 1e-2, 1e-1), budget=1):
    traj = dy.evolve(THREE_POSITIVE, s + max(hs))
    e = kn.energy(THREE_POSITIVE)
    c = mt.lipschitz_constant(e)
    rows = []
    for h in hs:
        u, v = traj.state_at(s), traj.state_at(s + h)
        rep = mt.j_bounds(u, v, extra=[mt.plan_flow(traj, s, s + h)], budget=budget)
        rows.append((h, rep.upper, c * h))
    return c, rows


def suite_time_lipschitz(size=None, seed=0):
    c, rows = time_lipschitz_report()
    return [_v("time_lipschitz", f"upper bound between u(s), u(s+{h:g}) <= C h", up, b, c)
            for h, up, b in rows]


def stability_report(delta=1.5e-4, t_final=1.0, samples=11, kappa_max=None, budget=1):
    u0 = THREE_POSITIVE
    v0 = kn.PeakonState(u0.p * (1 + delta), u0.q)
    tu, tv = dy.evolve(u0, t_final), dy.evolve(v0, t_final)
    if kappa_max is None:
        kappa_max = mt.default_kappa_max(kn.energy(u0), kn.energy(v0))
    rep0 = mt.j_bounds(u0, v0, budget=budget)
    psi0 = rep0.best_plan
    ts = np.linspace(0.0, t_final, samples)
    rows = [(0.0, rep0.lower, rep0.upper)]
    for t in ts[1:]:
        u, v = tu.state_at(t), tv.state_at(t)
        rep = mt.j_bounds(u, v, extra=[mt.plan_characteristic(tu, tv, psi0, t)], budget=budget)
        rows.append((float(t), rep.lower, rep.upper))
    ups = np.array([r[2] for r in rows])
    slope = float(np.polyfit(ts, np.log(ups), 1)[0])
    ratio = float(np.max(ups * np.exp(-kappa_max * ts) / ups[0]))
    return {"kappa_max": kappa_max, "slope": slope, "ratio": ratio, "rows": rows}


def suite_stability(size=None, seed=0, kappa_max=None):
    r = stability_report(kappa_max=kappa_max)
    k = r["kappa_max"]
    return [_v("stability", "fitted growth rate of the upper bound <= kappa_max", r["slope"], k, k,
               detail=f"J0={r['rows'][0][2]:.3e}"),
            _v("stability", "upper(t) <= 1.1 J0 exp(kappa_max t)", r["ratio"], 1.1, k)]


# ---------------------------------------------------------------------------
# approximation


def convergence_errors(label="sin", ns=(8, 16, 32, 64)):
    d = ap.get_datum(label)
    return [ap.approx_error(d, ap.multipeakon_approx(d, n)) for n in ns]


def suite_convergence(size=None, seed=0):
    errs = convergence_errors()
    ratio = max(b / a for a, b in zip(errs, errs[1:]))
    mass = max(abs(ap.multipeakon_approx(d, 32).p.sum() - ap.total_mass(d))
               for d in ap.CORPUS.values())
    failures, worst = [], 0.0
    for label, d in ap.CORPUS.items():
        errs_d = convergence_errors(label)
        worst = max(worst, max(b - a for a, b in zip(errs_d, errs_d[1:])))
        for n in (8, 16, 32, 64):
            try:
                dy.evolve(ap.multipeakon_approx(d, n), 1.0)
            except dy.PeakonError as exc:
                failures.append(f"{label}/N={n}: {exc}")
    return [_v("convergence", "error ratio between successive N < 1", ratio, 1.0 - 1e-12,
               detail=" ".join(f"{e:.4g}" for e in errs)),
            _v("convergence", "error(64) <= error(8)/4", errs[-1], errs[0] / 4),
            _v("convergence", "sum of strengths equals total mass", mass, 1e-12),
            _v("convergence", "corpus errors nonincreasing in N", worst, 1e-12),
            _v("convergence", "corpus evolves to t=1 without solver errors", len(failures), 0,
               detail="; ".join(failures))]


SUITES = {
    "kernel": suite_kernel,
    "conservation": suite_conservation,
    "collision": suite_collision,
    "residual": suite_residual,
    "reversibility": suite_reversibility,
    "l2_speed": suite_l2_speed,
    "metric": suite_metric,
    "sandwich": suite_sandwich,
    "time_lipschitz": suite_time_lipschitz,
    "stability": suite_stability,
    "convergence": suite_convergence,
}


def run_suite(name, size=None, seed=0):
    try:
        fn = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES)}") from None
    return fn(seed=seed) if size is None else fn(size=size, seed=seed)
