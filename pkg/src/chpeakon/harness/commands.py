"""Drivers behind the CLI subcommands. Each returns an OutputRecord."""

from __future__ import annotations

import numpy as np

from .. import approx as ap
from .. import dynamics as dy
from .. import kernel as kn
from .. import metric as mt
from .scenario import OutputRecord, Scenario, ScenarioError
from .suites import SUITES, run_suite, _v


def _trajectory_rows(traj, times):
    rows, peakons = [], []
    for t in times:
        s = traj.state_at(float(t))
        rows.append([float(t), len(s), kn.energy(s), traj.hamiltonian_at(float(t)), dy.momentum(s)])
        peakons += [[float(t), k, float(p), float(q)] for k, (p, q) in enumerate(zip(s.p, s.q))]
    return rows, peakons


def cmd_simulate(sc: Scenario) -> OutputRecord:
    s0 = sc.initial.state()
    traj = dy.evolve(s0, sc.t_final, sc.solver)
    times = sc.times()
    rows, peakons = _trajectory_rows(traj, times)
    events = [[e.tau, e.qbar, e.atom] for e in traj.events]
    e0, h0, m0 = rows[0][2], rows[0][3], rows[0][4]
    # only at a collision instant does energy sit in an atom
    released = [sum(e.atom for e in traj.events if abs(e.tau - t) < 1e-12) for t in times]
    de = max(abs(r[2] + a - e0) for r, a in zip(rows, released)) / (1 + e0)
    dh = max(abs(traj.hamiltonian_at(t) - h0) for t in traj.times) / (1 + abs(h0))
    dm = max(abs(dy.momentum(s) - m0) for _, s in traj.samples)
    verdicts = [
        _v("simulate", "hamiltonian drift |dH|/(1+|H0|)", dh, 1e-8),
        _v("simulate", "momentum drift |d sum p|", dm, 1e-8),
        _v("simulate", "energy bookkeeping with atoms", de, 1e-4),
    ]
    return OutputRecord(scenario=sc.to_dict(), trajectory=rows, peakons=peakons,
                        events=events, verdicts=verdicts)


def cmd_metric(sc: Scenario) -> OutputRecord:
    """Lower and upper transport-distance bounds along two trajectories."""
    if sc.partner is None:
        raise ScenarioError("metric scenarios need a 'partner' initial state")
    u0, v0 = sc.initial.state(), sc.partner.state()
    tu = dy.evolve(u0, sc.t_final, sc.solver)
    tv = dy.evolve(v0, sc.t_final, sc.solver)
    opts = sc.metric
    kappa = opts.kappa_max
    if kappa is None:
        kappa = mt.default_kappa_max(kn.energy(u0), kn.energy(v0))
    times = sc.times()
    rep0 = mt.j_bounds(u0, v0, budget=opts.budget, knots=opts.knots)
    rows = [[0.0, rep0.lower, rep0.upper, rep0.seed_index]]
    for t in times[1:]:
        u, v = tu.state_at(float(t)), tv.state_at(float(t))
        extra = []
        if not (tu.events_between(0.0, t) or tv.events_between(0.0, t)):
            extra.append(mt.plan_characteristic(tu, tv, rep0.best_plan, float(t), grid=opts.grid))
        rep = mt.j_bounds(u, v, extra=extra, budget=opts.budget, knots=opts.knots)
        rows.append([float(t), rep.lower, rep.upper, rep.seed_index])
    ups = np.array([r[2] for r in rows])
    sandwich = max(r[1] - r[2] for r in rows)
    verdicts = [_v("metric", "lower L1 bound <= upper bound", sandwich, 0.0)]
    if ups[0] > 0:
        verdicts.append(_v("metric", "upper(t) <= 1.1 J0 exp(kappa_max t)",
                           float(np.max(ups * np.exp(-kappa * times) / ups[0])), 1.1, kappa))
        if np.all(ups > 0):
            slope = float(np.polyfit(times, np.log(ups), 1)[0])
            verdicts.append(_v("metric", "fitted growth rate <= kappa_max", slope, kappa, kappa))
    else:
        verdicts.append(_v("metric", "identical data keep upper bound zero", float(ups.max()), 0.0))
    trajectory, peakons = _trajectory_rows(tu, times)
    return OutputRecord(scenario=sc.to_dict(), trajectory=trajectory, peakons=peakons,
                        metric=rows, verdicts=verdicts)


def cmd_approx(sc: Scenario) -> OutputRecord:
    label = sc.datum or sc.initial.datum
    if label is None:
        raise ScenarioError("approx scenarios need 'approx': {'datum': ...}")
    d = ap.get_datum(label)
    rows, errs = [], []
    for n in sc.n_list:
        s = ap.multipeakon_approx(d, n)
        err = ap.approx_error(d, s)
        errs.append(err)
        rows.append([label, n, err, float(s.p.sum())])
    mass = ap.total_mass(d)
    verdicts = [_v("approx", "sum of strengths equals total mass",
                   max(abs(r[3] - mass) for r in rows), 1e-12)]
    if len(errs) > 1 and label == "sin":
        verdicts.append(_v("approx", "error ratio between successive N < 1",
                           max(b / a for a, b in zip(errs, errs[1:])), 1.0 - 1e-12))
    return OutputRecord(scenario=sc.to_dict(), approx=rows, verdicts=verdicts)


def cmd_verify(sc: Scenario) -> OutputRecord:
    name = sc.suite or "kernel"
    if name not in SUITES:
        raise ScenarioError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
    return OutputRecord(scenario=sc.to_dict(), verdicts=run_suite(name, sc.size, sc.seed))


COMMANDS = {"simulate": cmd_simulate, "metric": cmd_metric,
            "approx": cmd_approx, "verify": cmd_verify}
