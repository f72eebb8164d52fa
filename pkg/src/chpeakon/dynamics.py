"""Multipeakon time evolution with conservative continuation through collisions.

Regular motion is the Hamiltonian flow of ``H = 1/2 sum p_i p_j chi(q_i - q_j)``.
When a positive peakon runs into a negative one, the colliding pair is
integrated in the rescaled variables

    z = p1 + p2,  w = 2 arctan(p2 - p1),  eta = q1 + q2,  zeta = (p2 - p1)^2 (q2 - q1),

in which the collision (w = pi) is a regular point. Slots 1 and 2 always
denote the left and right member of the pair, so the reconstructed gap
``q2 - q1 = zeta / tan^2(w/2)`` is nonnegative on both sides of the
collision while the sign of ``p2 - p1`` flips.

The chart vector field below is the chain rule applied to the regular
flow, with every removable singularity at w = pi cancelled analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import RK45, solve_ivp
from scipy.optimize import brentq

from .kernel import (
    CHI0,
    PeakonState,
    chi,
    chi_gap,
    chi_prime,
    energy,
    panel_breaks,
    panel_nodes,
    profile,
    source_Px,
)


class PeakonError(Exception):
    pass


class CollisionRequired(PeakonError):
    """Coincident positions: the regular system is undefined there."""


class UnsupportedInteraction(PeakonError):
    """More than two peakons interact at one point, or a spectator enters a chart."""


class SingularChart(PeakonError):
    """``from_rescaled`` called exactly at the collision angle w = pi."""


class EventInWindow(PeakonError):
    """A collision lies inside a time window that must be event free."""


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    gap_threshold: float = 1e-2
    slope_threshold: float = 50.0
    max_step: float = 0.05
    chart_exit_margin: float = math.pi / 4
    # leave the chart early once the outgoing pair is this far apart
    chart_gap_limit: float = 0.05
    # closest a spectator may come to an uncrossed chart pair
    spectator_margin: float = 1e-8

    def __post_init__(self):
        vals = (self.rel_tol, self.abs_tol, self.gap_threshold, self.slope_threshold,
                self.max_step, self.chart_exit_margin, self.chart_gap_limit,
                self.spectator_margin)
        if min(vals) <= 0:
            raise ValueError("solver settings must be positive")
        if self.gap_threshold >= 0.5 or self.chart_gap_limit >= 0.5:
            raise ValueError("gap thresholds must be < 0.5")
        if not self.chart_exit_margin < math.pi / 2:
            raise ValueError("chart_exit_margin must lie in (0, pi/2)")


@dataclass(frozen=True)
class CollisionChart:
    z: float
    w: float
    eta: float
    zeta: float
    spectators: PeakonState
    pair_index: int = 0


@dataclass(frozen=True)
class CollisionEvent:
    tau: float
    qbar: float
    atom: float


# ||chi'/2||_L2 on one period, from int_0^1 chi'^2 = (e^2 - 2e - 1)/(e - 1)^2
_HALF_CHI_PRIME_L2 = 0.5 * math.sqrt(math.e ** 2 - 2 * math.e - 1) / (math.e - 1)


# ---------------------------------------------------------------------------
# regular flow


def hamiltonian(s: PeakonState) -> float:
    """``H = 1/2 sum_ij p_i p_j chi(q_i - q_j)``.

    Written as ``chi(0)/2 (sum p)^2 - sum_{i<j} p_i p_j (chi(0) - chi(q_i - q_j))``
    so that a nearly collided pair with huge opposite strengths does not
    cancel catastrophically.
    """
    p, q = s.p, s.q
    if len(p) == 0:
        return 0.0
    gap = chi_gap(q[:, None] - q[None, :])
    pp = np.outer(p, p)
    iu = np.triu_indices(len(p), 1)
    return float(0.5 * CHI0 * p.sum() ** 2 - (pp[iu] * gap[iu]).sum())


def rhs_regular(s: PeakonState):
    """Hamiltonian vector field ``(dp, dq)`` of the regular regime."""
    if len(s) >= 2 and s.min_gap() == 0.0:
        raise CollisionRequired("coincident peakon positions")
    return _rhs_singles(s.p, s.q)


def _rhs_singles(p, q):
    d = q[:, None] - q[None, :]
    dq = chi(d) @ p
    kp = chi_prime(d)
    np.fill_diagonal(kp, 0.0)
    dp = -p * (kp @ p)
    return dp, dq


def momentum(s: PeakonState) -> float:
    return float(np.sum(s.p))


# ---------------------------------------------------------------------------
# collision chart


def _g_series(g):
    """``(chi'(g) + (chi(0) - chi(g)) / g) / g`` for 0 <= g < 1, by power series."""
    out = 0.0
    gp = 1.0
    fact = 2.0  # (n + 1)!
    for n in range(1, 40):
        dn = CHI0 if (n + 1) % 2 == 0 else -1.0
        out += dn * n * gp / fact
        gp *= g
        fact *= n + 2
    return out


def _shc(g):
    """``sinh(g/2) / (g/2)``."""
    h = 0.5 * g
    return 1.0 + h * h / 6.0 if h < 1e-4 else math.sinh(h) / h


class _Pair:
    """Derived quantities of one chart point (z, w, eta, zeta).

    The angle is carried as the offset ``om = w - pi`` so that points close
    to the collision keep full relative precision.
    """

    __slots__ = ("z", "om", "eta", "zeta", "a", "b", "g", "m", "ch", "sh", "dsh", "cot")

    def __init__(self, z, om, eta, zeta):
        self.z, self.om, self.eta, self.zeta = z, om, eta, zeta
        self.a = -math.sin(0.5 * om)
        self.b = math.cos(0.5 * om)
        self.cot = self.a / self.b
        self.g = zeta * self.cot * self.cot
        self.m = 0.5 * eta
        self.ch = math.cosh(0.5 * self.g)
        self.sh = math.sinh(0.5 * self.g)
        # (p2 - p1) * sinh(g/2), finite at w = pi
        self.dsh = 0.5 * zeta * self.cot * _shc(self.g)

    @property
    def w(self):
        return math.pi + self.om

    def field(self, x):
        """Potential ``S`` and slope ``S'`` generated by the pair at points x outside it."""
        y = np.asarray(x, dtype=float) - self.m
        cy, cpy = chi(y), chi_prime(y)
        return self.z * self.ch * cy - self.dsh * cpy, self.z * self.ch * cpy - self.dsh * cy

    def distance_to(self, x):
        """Periodic distance from x to the interval [q1, q2]."""
        r = np.abs(np.mod(np.asarray(x, dtype=float) - self.m + 0.5, 1.0) - 0.5)
        return np.maximum(r - 0.5 * self.g, 0.0)

    def derivative(self, sm, smp):
        z, a, b, g, zeta, cot = self.z, self.a, self.b, self.g, self.zeta, self.cot
        cpg = float(chi_prime(g)) if g > 0 else -1.0
        dz = -z * self.ch * smp - self.dsh * sm
        deta = z * (CHI0 + float(chi(g))) + 2.0 * self.ch * sm
        dw = (-(z * z * a * a - b * b) * cpg
              - 2.0 * z * a * a * self.sh * sm
              - 2.0 * a * b * self.ch * smp)
        dzeta = (-zeta * z * z * cot * cpg
                 + zeta * zeta * cot * _g_series(g)
                 - 2.0 * zeta * z * cot * self.sh * sm
                 - 2.0 * zeta * self.ch * smp
                 + zeta * _shc(g) * smp)
        return dz, dw, deta, dzeta

    def reconstruct(self):
        if self.b == 0.0 or self.a == 0.0:
            raise SingularChart("chart point sits exactly at w = pi")
        d = self.b / self.a
        return ((self.z - d) / 2, (self.z + d) / 2,
                self.m - 0.5 * self.g, self.m + 0.5 * self.g)


MERGE_SPLIT = 1e12


def _chart_offset(d):
    """``w - pi`` for ``w = 2 arctan(d)`` taken in (0, 2 pi)."""
    if d == 0.0:
        return -math.pi
    return -2.0 * math.atan(1.0 / d)


def _pair_of(c: CollisionChart) -> _Pair:
    return _Pair(c.z, c.w - math.pi, c.eta, c.zeta)


def to_rescaled(s: PeakonState, pair) -> CollisionChart:
    """Chart coordinates of the adjacent pair ``(i, i+1 mod N)`` of ``s``."""
    i = pair[0] if isinstance(pair, (tuple, list)) else int(pair)
    n = len(s)
    if n < 2:
        raise ValueError("a collision chart needs at least two peakons")
    j = (i + 1) % n
    if isinstance(pair, (tuple, list)) and pair[1] != j:
        raise ValueError("chart pairs must be adjacent in cyclic order")
    p1, p2 = s.p[i], s.p[j]
    q1 = s.q[i]
    q2 = q1 + np.mod(s.q[j] - q1, 1.0)
    d = p2 - p1
    if d == 0.0:
        raise ValueError("equal strengths put the angle on the chart boundary w = 0")
    keep = [k for k in range(n) if k not in (i, j)]
    return CollisionChart(
        z=float(p1 + p2), w=math.pi + _chart_offset(d), eta=float(q1 + q2),
        zeta=float(d * d * (q2 - q1)),
        spectators=PeakonState(s.p[keep], s.q[keep]), pair_index=i)


def from_rescaled(c: CollisionChart) -> PeakonState:
    p1, p2, q1, q2 = _pair_of(c).reconstruct()
    sp = c.spectators
    return PeakonState(np.concatenate([[p1, p2], sp.p]), np.concatenate([[q1, q2], sp.q]))


def rhs_rescaled(c: CollisionChart):
    """Chart vector field ``(dz, dw, deta, dzeta, dp_spect, dq_spect)``."""
    pair = _pair_of(c)
    sp = c.spectators
    if pair.g >= 1.0 or (len(sp) and np.any(pair.distance_to(sp.q) == 0.0)):
        raise UnsupportedInteraction("spectator inside the collision window")
    lay = _Layout(len(sp), [(None, None)])
    y = np.concatenate([sp.p, sp.q, [c.z, pair.om, c.eta, c.zeta]])
    dy = lay.rhs(0.0, y)
    k = len(sp)
    return (dy[2 * k], dy[2 * k + 1], dy[2 * k + 2], dy[2 * k + 3], dy[:k], dy[k:2 * k])


# ---------------------------------------------------------------------------
# mixed regular/chart state vector


class _Layout:
    """State vector: singles' p and q, then (z, w - pi, eta, zeta) per chart pair.

    ``singles`` and ``pairs`` hold slot numbers in the fixed cyclic order of
    the peakons; a pair (i, j) has i on the left.
    """

    def __init__(self, n_singles, pairs, singles=None):
        self.singles = list(range(n_singles)) if singles is None else list(singles)
        self.pairs = list(pairs)

    @property
    def ns(self):
        return len(self.singles)

    def groups(self, y):
        ns = self.ns
        p, q = y[:ns], y[ns:2 * ns]
        charts = [_Pair(*y[2 * ns + 4 * k: 2 * ns + 4 * k + 4]) for k in range(len(self.pairs))]
        return p, q, charts

    def rhs(self, t, y):
        ns = self.ns
        for k in range(len(self.pairs)):
            _, om, _, zeta = y[2 * ns + 4 * k: 2 * ns + 4 * k + 4]
            b = math.cos(0.5 * om)
            # trial stages far outside the chart: NaN makes the stepper shrink h
            if b == 0.0 or abs(zeta) * (math.sin(0.5 * om) / b) ** 2 >= 1.0:
                return np.full_like(y, np.nan)
        p, q, charts = self.groups(y)
        ns = self.ns
        dy = np.empty_like(y)
        if ns:
            dp, dq = _rhs_singles(p, q)
            for c in charts:
                s, sp = c.field(q)
                dq += s
                dp -= p * sp
            dy[:ns], dy[ns:2 * ns] = dp, dq
        for k, c in enumerate(charts):
            sm = smp = 0.0
            if ns:
                d = c.m - q
                sm = float(chi(d) @ p)
                smp = float(chi_prime(d) @ p)
            for kk, o in enumerate(charts):
                if kk != k:
                    s, sp = o.field(c.m)
                    sm += float(s)
                    smp += float(sp)
            dy[2 * ns + 4 * k: 2 * ns + 4 * k + 4] = c.derivative(sm, smp)
        return dy

    def hamiltonian(self, y):
        """H from the layout variables, without reconstructing huge chart strengths."""
        ps, qs, charts = self.groups(y)
        h = hamiltonian(PeakonState(ps, qs)) if self.ns else 0.0
        for k, c in enumerate(charts):
            # self term 1/2 chi0 z^2 + (d^2 - z^2)/4 chi_gap(g), with d^2 = zeta / g
            gap = float(chi_gap(c.g))
            ratio = gap / c.g if c.g > 1e-12 else 1.0 - 0.5 * CHI0 * c.g
            h += 0.5 * CHI0 * c.z ** 2 + 0.25 * (c.zeta * ratio - c.z ** 2 * gap)
            if self.ns:
                h += float(ps @ c.field(qs)[0])
            for o in charts[k + 1:]:
                sv, spv = c.field(o.m)
                h += o.z * o.ch * float(sv) + o.dsh * float(spv)
        return h

    def pack(self, p, q):
        """State vector from full slot arrays (pairs converted to chart form)."""
        parts = [p[self.singles], q[self.singles]]
        for i, j in self.pairs:
            q1 = q[i]
            q2 = q1 + np.mod(q[j] - q1, 1.0)
            d = p[j] - p[i]
            parts.append([p[i] + p[j], _chart_offset(d), q1 + q2, d * d * (q2 - q1)])
        return np.concatenate([np.asarray(a, dtype=float) for a in parts])

    def unpack(self, y, n):
        """Full slot arrays; raises SingularChart exactly at w = pi."""
        p, q = np.empty(n), np.empty(n)
        ps, qs, charts = self.groups(y)
        p[self.singles], q[self.singles] = ps, qs
        for (i, j), c in zip(self.pairs, charts):
            p[i], p[j], q[i], q[j] = c.reconstruct()
        return p, q

    def profile_state(self, y, n):
        """PeakonState of the profile.

        A pair with ``|p2 - p1| > MERGE_SPLIT`` is replaced by one peakon of
        strength ``z cosh(g/2)`` at its midpoint. Summing the two huge
        opposite strengths would leave rounding noise of size
        ``eps |p2 - p1|``, while the dipole that merging drops is only
        ``zeta / (2 |p2 - p1|)``. In practice this happens only at the
        collision instant itself.
        """
        ps, qs, charts = self.groups(y)
        p, q = list(ps), list(qs)
        for c in charts:
            if abs(c.a) * MERGE_SPLIT < abs(c.b):
                p.append(c.z * c.ch)
                q.append(c.m)
            else:
                p1, p2, q1, q2 = c.reconstruct()
                p += [p1, p2]
                q += [q1, q2]
        return PeakonState(np.array(p), np.array(q))


@dataclass
class _Segment:
    t0: float
    t1: float
    dense: object
    layout: _Layout
    n: int

    def state(self, t):
        return self.layout.profile_state(self.dense(t), self.n)

    def hamiltonian(self, t):
        return self.layout.hamiltonian(self.dense(t))


@dataclass
class Trajectory:
    """Time-stamped states, collision events and the regime (regular/chart) log."""

    samples: list = field(default_factory=list)
    events: list = field(default_factory=list)
    regime_log: list = field(default_factory=list)
    _segments: list = field(default_factory=list, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def t_range(self):
        return self.samples[0][0], self.samples[-1][0]

    def state_at(self, t: float) -> PeakonState:
        """Dense-output state at time t (the merged profile exactly at a collision)."""
        lo, hi = self.t_range
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise ValueError(f"t={t} outside trajectory range [{lo}, {hi}]")
        if not self._segments:
            return self.samples[0][1]
        for seg in self._segments:
            a, b = min(seg.t0, seg.t1), max(seg.t0, seg.t1)
            if a <= t <= b:
                return seg.state(t)
        seg = min(self._segments, key=lambda sg: min(abs(t - sg.t0), abs(t - sg.t1)))
        return seg.state(t)

    def _segment(self, t):
        for seg in self._segments:
            if min(seg.t0, seg.t1) <= t <= max(seg.t0, seg.t1):
                return seg
        return min(self._segments, key=lambda sg: min(abs(t - sg.t0), abs(t - sg.t1)))

    def hamiltonian_at(self, t: float) -> float:
        """H at time t, evaluated in chart variables while a pair is in a chart."""
        if not self._segments:
            return hamiltonian(self.samples[0][1])
        return self._segment(t).hamiltonian(t)

    def events_between(self, s: float, s2: float):
        a, b = min(s, s2), max(s, s2)
        return [e for e in self.events if a < e.tau < b]

    def in_chart(self, t: float) -> bool:
        return any(kind == "chart" and min(a, b) <= t <= max(a, b)
                   for (a, b), kind in self.regime_log)


# ---------------------------------------------------------------------------
# collision detection


def collision_candidates(p, q, cfg: SolverConfig, direction: float = 1.0, slots=None):
    """Adjacent pairs (i, i+1) that are about to collide, i.e. a positive
    peakon closely followed by a negative one with a steep slope between them.

    ``slots`` restricts the search to peakons that are not already in a chart.
    """
    n = len(p)
    if n < 2:
        return []
    allowed = set(range(n)) if slots is None else set(slots)
    out = []
    pairs = [(i, (i + 1) % n) for i in range(n)] if n > 2 else [(0, 1), (1, 0)]
    for i, j in pairs:
        if i not in allowed or j not in allowed:
            continue
        gap = np.mod(q[j] - q[i], 1.0)
        d = p[j] - p[i]
        if gap < cfg.gap_threshold and p[i] * p[j] < 0 and direction * d < -cfg.slope_threshold:
            out.append((i, j))
    used = [k for pr in out for k in pr]
    if len(used) != len(set(used)):
        raise UnsupportedInteraction("three or more peakons interacting at one point")
    return out


def detect_collision(s: PeakonState, cfg: Optional[SolverConfig] = None,
                     direction: float = 1.0):
    """First adjacent pair about to collide, or None."""
    cands = collision_candidates(s.p, s.q, cfg or SolverConfig(), direction)
    return cands[0] if cands else None


# ---------------------------------------------------------------------------
# evolution


def evolve(s0: PeakonState, t_final: float, cfg: Optional[SolverConfig] = None,
           t0: float = 0.0) -> Trajectory:
    """Conservative multipeakon solution on [t0, t_final] (either direction)."""
    cfg = cfg or SolverConfig()
    if np.any(s0.p == 0.0):
        # zero-strength peakons carry no profile; left in, they would hide
        # an approaching pair from the adjacency test
        keep = s0.p != 0.0
        s0 = PeakonState(s0.p[keep], s0.q[keep])
    n = len(s0)
    traj = Trajectory(samples=[(t0, s0)])
    if t_final == t0:
        return traj
    direction = 1.0 if t_final > t0 else -1.0
    if n == 0:
        traj.samples.append((t_final, s0))
        traj.regime_log.append(((t0, t_final), "regular"))
        return traj
    if n >= 2 and s0.min_gap() == 0.0:
        raise CollisionRequired("initial data has coincident peakons")

    p, q = s0.p.copy(), s0.q.copy()
    layout = _Layout(n, [])
    crossed = []
    t = t0
    y = layout.pack(p, q)
    seg_start = t0

    def close_regime(t_end):
        kind = "chart" if layout.pairs else "regular"
        if t_end != seg_start:
            traj.regime_log.append(((seg_start, t_end), kind))

    while direction * (t_final - t) > 0:
        solver = RK45(layout.rhs, t, y, t_final, max_step=cfg.max_step,
                      rtol=cfg.rel_tol, atol=cfg.abs_tol)
        switch = None
        while solver.status == "running":
            t_old, y_old = solver.t, solver.y.copy()
            solver.step()
            if solver.status == "failed":
                raise PeakonError(f"integrator failed at t={t_old}: {solver.message}")
            t_new, y_new = solver.t, solver.y.copy()
            dense = solver.dense_output()
            traj._segments.append(_Segment(t_old, t_new, dense, layout, n))

            _, _, charts_old = layout.groups(y_old)
            _, q_new, charts = layout.groups(y_new)
            for k, (c0, c1) in enumerate(zip(charts_old, charts)):
                f0, f1 = c0.om, c1.om
                if not crossed[k] and f0 * f1 <= 0 and f0 != f1:
                    tau = brentq(lambda tt: dense(tt)[2 * layout.ns + 4 * k + 1],
                                 t_old, t_new, xtol=1e-13, rtol=4 * np.finfo(float).eps)
                    yc = dense(tau)[2 * layout.ns + 4 * k: 2 * layout.ns + 4 * k + 4]
                    traj.events.append(CollisionEvent(tau=float(tau),
                                                      qbar=float(np.mod(yc[2] / 2, 1.0)),
                                                      atom=float(yc[3])))
                    crossed[k] = True

            state = layout.profile_state(y_new, n)
            traj.samples.append((t_new, state))

            # a crossed pair also hands back to the regular flow once a
            # neighbour is no farther away than the pair's own gap, so the
            # next binary collision can get a chart of its own
            near = _neighbour_distances(layout, y_new)
            exits = [k for k, c in enumerate(charts)
                     if abs(c.om) > cfg.chart_exit_margin
                     or (crossed[k] and (c.g > cfg.chart_gap_limit
                                         or near[k] <= min(c.g, cfg.gap_threshold)))]
            _check_spectators(layout, y_new, cfg, skip=exits)
            if exits:
                switch = ("exit", exits)
                break
            if n >= 2:
                # all candidates, chart pairs included: one sharing a peakon
                # with a chart pair means more than two bodies interact
                pf, qf = _slot_arrays(layout, y_new, n)
                cands = []
                for pr in collision_candidates(pf, qf, cfg, direction):
                    if pr in layout.pairs:
                        continue
                    hit = [k for k, pair in enumerate(layout.pairs) if set(pr) & set(pair)]
                    if not hit:
                        cands.append(pr)
                    elif not all(crossed[k] for k in hit):
                        raise UnsupportedInteraction("three or more peakons interacting at one point")
                    # otherwise wait until the crossed pair hands back
                if cands:
                    switch = ("enter", cands)
                    break

        t, y = solver.t, solver.y.copy()
        if switch is None:
            break
        close_regime(t)
        seg_start = t
        p, q = layout.unpack(y, n)
        kind, which = switch
        if kind == "exit":
            pairs = [pr for k, pr in enumerate(layout.pairs) if k not in which]
            crossed = [c for k, c in enumerate(crossed) if k not in which]
        else:
            pairs = layout.pairs + which
            crossed = crossed + [False] * len(which)
        in_pairs = {k for pr in pairs for k in pr}
        layout = _Layout(0, pairs, singles=[k for k in range(n) if k not in in_pairs])
        y = layout.pack(p, q)

    close_regime(t)
    if direction < 0:
        traj.samples.reverse()
        traj.events.reverse()
        traj._segments.reverse()
        traj.regime_log = [((b, a), kind) for (a, b), kind in reversed(traj.regime_log)]
    return traj


def _slot_arrays(layout, y, n):
    """Slot arrays for collision detection; a pair exactly at w = pi counts as merged."""
    p, q = np.full(n, np.nan), np.full(n, np.nan)
    ps, qs, charts = layout.groups(y)
    p[layout.singles], q[layout.singles] = ps, qs
    for (i, j), c in zip(layout.pairs, charts):
        if c.a == 0.0:
            p[i] = p[j] = 0.5 * c.z
            q[i] = q[j] = c.m
        else:
            p[i], p[j], q[i], q[j] = c.reconstruct()
    return p, q


def _neighbour_distances(layout, y):
    """Per chart: distance from its pair interval to the closest other peakon."""
    _, qs, charts = layout.groups(y)
    out = []
    for k, c in enumerate(charts):
        pts = [np.asarray(qs, dtype=float)]
        pts += [np.array([o.m - 0.5 * o.g, o.m + 0.5 * o.g]) for kk, o in enumerate(charts) if kk != k]
        pts = np.concatenate(pts)
        out.append(float(np.min(c.distance_to(pts))) if len(pts) else np.inf)
    return out


def _check_spectators(layout, y, cfg, skip=()):
    charts = layout.groups(y)[2]
    near = _neighbour_distances(layout, y)
    for k, c in enumerate(charts):
        if k in skip:
            continue
        if c.g >= 1.0:
            raise UnsupportedInteraction("chart gap wrapped around the circle")
        if near[k] < cfg.spectator_margin:
            raise UnsupportedInteraction("another peakon entered a collision window")


# ---------------------------------------------------------------------------
# characteristics and equation residual


def characteristic_flow(traj: Trajectory, s: float, s2: float, x, rtol: float = 1e-10,
                        atol: float = 1e-12):
    """Positions at time s2 of the characteristics ``xi' = u(t, xi)``, ``xi(s) = x``."""
    if traj.events_between(s, s2):
        raise EventInWindow("characteristics are not unique across a collision")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x0 = np.atleast_1d(x).astype(float)
    if s2 == s:
        return float(x0[0]) if scalar else x0

    def rhs(t, xi):
        return profile(traj.state_at(t), xi)[0]

    sol = solve_ivp(rhs, (s, s2), x0, method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise PeakonError(sol.message)
    out = sol.y[:, -1]
    return float(out[0]) if scalar else out


def _nearest_periodic(q, targets):
    if len(targets) == 0:
        return q
    d = np.mod(targets - q + 0.5, 1.0) - 0.5
    return q + d[np.argmin(np.abs(d))]


def residual_check(traj: Trajectory, t: float, dt: float = 1e-4, panel_width: float = 1 / 32):
    """L2 norm over one period of ``u_t + u u_x + P_x``.

    ``u_t`` is a centered difference of profiles at ``t +- dt``. The thin
    zones swept by each peak during ``[t - dt, t + dt]``, where the
    difference quotient straddles a kink, are excluded from the integral.
    """
    sm, s0, sp = traj.state_at(t - dt), traj.state_at(t), traj.state_at(t + dt)
    if len(s0) == 0 and len(sm) == 0 and len(sp) == 0:
        return 0.0
    zones = []
    for qi in s0.q:
        a = _nearest_periodic(qi, sm.q)
        b = _nearest_periodic(qi, sp.q)
        zones.append((min(qi, a, b), max(qi, a, b)))
    ends = [v for z in zones for v in z]
    nb = int(np.ceil(1 / panel_width))
    breaks = np.unique(np.concatenate([[0.0, 1.0], np.mod(ends, 1.0), np.linspace(0, 1, nb + 1)]))
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    keep = np.ones(len(mids), dtype=bool)
    for a, b in zones:
        r = np.mod(mids - a, 1.0)
        keep &= ~(r < (b - a))
    x, w = [], []
    for k in np.flatnonzero(keep):
        xx, ww = panel_nodes(breaks[k:k + 2], 8)
        x.append(xx)
        w.append(ww)
    x, w = np.concatenate(x), np.concatenate(w)
    u_plus, _ = profile(sp, x)
    u_minus, _ = profile(sm, x)
    u, ux = profile(s0, x)
    res = (u_plus - u_minus) / (2 * dt) + u * ux + source_Px(s0, x)
    return float(np.sqrt(w @ (res * res)))


def energy_at(traj: Trajectory, t: float) -> float:
    return energy(traj.state_at(t))


def l2_speed(traj: Trajectory, t: float, dt: float = 1e-4) -> float:
    """``||u_t||_L2`` over one period from a centered difference of profiles."""
    sm, sp = traj.state_at(t - dt), traj.state_at(t + dt)
    x, w = panel_nodes(panel_breaks(sm.q, sp.q, max_width=1 / 32))
    d = (profile(sp, x)[0] - profile(sm, x)[0]) / (2 * dt)
    return float(np.sqrt(w @ (d * d)))


def l2_speed_bound(s: PeakonState) -> float:
    """``||u||_inf ||u_x||_L2 + ||chi'/2||_L2 ||u^2 + u_x^2/2||_L1`` on one period."""
    if len(s) == 0:
        return 0.0
    x, w = panel_nodes(panel_breaks(s.q, max_width=1 / 32))
    u, ux = profile(s, x)
    sup_u = float(np.abs(np.concatenate([u, profile(s, s.q)[0]])).max())
    return sup_u * float(np.sqrt(w @ (ux * ux))) + _HALF_CHI_PRIME_L2 * float(w @ (u * u + 0.5 * ux * ux))



def gap_energy(s: PeakonState, k: int) -> float:
    """``int u_x^2`` over the arc from ``q[k]`` to the next peakon (cyclically)."""
    n = len(s)
    if n < 2:
        raise ValueError("need two peakons to form a gap")
    a = s.q[k]
    b = s.q[(k + 1) % n] + (1.0 if k == n - 1 else 0.0)
    x, w = panel_nodes(np.linspace(a, b, 9))
    ux = profile(s, x)[1]
    return float(w @ (ux * ux))


def extrapolated_atom(traj: Trajectory, ev: CollisionEvent, hs=(0.04, 0.02, 0.01, 0.005)) -> float:
    """Limit of the gap energy of the colliding pair as ``t -> tau`` from the past.

    Quadratic least-squares fit in the time offset, evaluated at offset 0.
    """
    vals = []
    for h in hs:
        s = traj.state_at(ev.tau - h)
        gaps = np.diff(np.append(s.q, s.q[0] + 1.0))
        mids = s.q + 0.5 * gaps
        d = np.abs(np.mod(mids - ev.qbar + 0.5, 1.0) - 0.5)
        vals.append(gap_energy(s, int(np.argmin(d))))
    return float(np.polyval(np.polyfit(hs, vals, 2), 0.0))
