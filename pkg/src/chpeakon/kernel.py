"""Periodic peakon kernel, multipeakon profiles, energy and source terms.

Everything lives on the unit circle: positions are reduced mod 1 and the
kernel ``chi`` is the 1-periodization of ``exp(-|x|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

E = np.e
_C = 1.0 / (E - 1.0)
CHI0 = (1.0 + E) * _C
QUAD_ORDER = 16


def _reduce(x):
    return np.mod(np.asarray(x, dtype=float), 1.0)


def chi(x):
    """1-periodic, even kernel ``sum_n exp(-|x - n|)``."""
    r = _reduce(x)
    return _C * (np.exp(r) + np.exp(1.0 - r))


def chi_prime(x, return_kink=False):
    """Derivative of ``chi``; at integers the right limit ``-1`` is returned.

    With ``return_kink=True`` a boolean mask of kink points is returned too.
    """
    r = _reduce(x)
    val = _C * (np.exp(r) - np.exp(1.0 - r))
    if return_kink:
        return val, r == 0.0
    return val


def chi_tilde(x):
    r = _reduce(x)
    return _C * (np.exp(1.0 - r) - np.exp(r))


def chi_gap(x):
    """``chi(0) - chi(x)`` without cancellation for x close to an integer."""
    r = _reduce(x)
    r = np.minimum(r, 1.0 - r)
    return _C * (-np.expm1(r) - E * np.expm1(-r))


@dataclass(frozen=True)
class PeakonState:
    """Strengths ``p`` and positions ``q`` of N periodic peakons.

    Positions are reduced into [0, 1) and sorted on construction.
    """

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError("p and q must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("peakon data must be finite")
        q = np.mod(q, 1.0)
        q[q >= 1.0] = 0.0
        order = np.argsort(q, kind="stable")
        p, q = p[order], q[order]
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def empty(cls) -> "PeakonState":
        return cls(np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return len(self.p)

    def scaled(self, factor: float) -> "PeakonState":
        return PeakonState(factor * self.p, self.q)

    def shifted(self, d: float) -> "PeakonState":
        return PeakonState(self.p, self.q + d)

    def min_gap(self) -> float:
        """Smallest periodic distance between two peakons (inf if N < 2)."""
        if len(self) < 2:
            return np.inf
        gaps = np.diff(np.append(self.q, self.q[0] + 1.0))
        return float(gaps.min())


@dataclass(frozen=True)
class ProfilePoint:
    x: float
    u: float
    ux: float
    theta: float


def profile(s: PeakonState, x):
    """Vectorized ``(u, ux)`` of the multipeakon ``s`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    if len(s) == 0:
        z = np.zeros_like(x)
        return z, z.copy()
    d = x[..., None] - s.q
    return chi(d) @ s.p, chi_prime(d) @ s.p


def eval_profile(s: PeakonState, x: float) -> ProfilePoint:
    u, ux = profile(s, float(x))
    u, ux = float(u), float(ux)
    return ProfilePoint(x=float(x), u=u, ux=ux, theta=2.0 * np.arctan(ux))


@lru_cache(maxsize=8)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_breaks(*point_sets, max_width: float = 1.0) -> np.ndarray:
    """Sorted breakpoints in [0, 1] containing 0, 1 and all points mod 1."""
    pts = [np.array([0.0, 1.0])]
    pts += [_reduce(np.asarray(ps, dtype=float).ravel()) for ps in point_sets]
    b = np.unique(np.concatenate(pts))
    if max_width < 1.0:
        extra = np.linspace(0.0, 1.0, int(np.ceil(1.0 / max_width)) + 1)
        b = np.unique(np.concatenate([b, extra]))
    return b


def panel_nodes(breaks, order: int = QUAD_ORDER):
    """Gauss-Legendre nodes and weights on every panel between ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    t, w = gauss_legendre(order)
    h = np.diff(breaks)
    keep = h > 0
    a, h = breaks[:-1][keep], h[keep]
    nodes = a[:, None] + h[:, None] * t
    weights = h[:, None] * w
    return nodes.ravel(), weights.ravel()


def energy(s: PeakonState, order: int = QUAD_ORDER) -> float:
    """Energy ``int_0^1 (u^2 + ux^2) dx`` over one period."""
    if len(s) == 0:
        return 0.0
    x, w = panel_nodes(panel_breaks(s.q), order)
    u, ux = profile(s, x)
    return float(w @ (u * u + ux * ux))


def h1_norm(s: PeakonState) -> float:
    return float(np.sqrt(energy(s)))


def h1_distance(a: PeakonState, b: PeakonState, order: int = QUAD_ORDER) -> float:
    x, w = panel_nodes(panel_breaks(a.q, b.q), order)
    ua, uax = profile(a, x)
    ub, ubx = profile(b, x)
    return float(np.sqrt(w @ ((ua - ub) ** 2 + (uax - ubx) ** 2)))


def _source_density(s: PeakonState, y):
    u, ux = profile(s, y)
    return u * u + 0.5 * ux * ux


def _source(s: PeakonState, x, kernel) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    if len(s) == 0:
        return out
    for k, xk in enumerate(x):
        y, w = panel_nodes(panel_breaks(s.q, [xk]))
        out[k] = 0.5 * (w @ (kernel(xk - y) * _source_density(s, y)))
    return out


def source_P(s: PeakonState, x):
    """``P = (1/2) chi * (u^2 + ux^2/2)`` evaluated at ``x``."""
    out = _source(s, x, chi)
    return float(out[0]) if np.ndim(x) == 0 else out


def source_Px(s: PeakonState, x):
    """``Px = (1/2) chi' * (u^2 + ux^2/2)`` evaluated at ``x``."""
    out = _source(s, x, chi_prime)
    return float(out[0]) if np.ndim(x) == 0 else out
