"""Multipeakon approximation of smooth periodic data.

Since ``(1/2)(chi - chi'') = delta`` on the circle, every smooth 1-periodic
f equals ``chi * (f - f'')/2``. A midpoint Riemann sum of that convolution
gives peakons with strengths ``p_i = int_cell (f - f'')/2`` placed at the
cell midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernel import PeakonState, chi, chi_prime, gauss_legendre, panel_breaks, panel_nodes, profile


@dataclass(frozen=True)
class SmoothPeriodicDatum:
    """Closed-form periodic datum with its first and second derivatives.

    ``atoms`` lists point masses ``(location, weight)`` of ``(f - f'')/2``
    that ``f2`` cannot express, e.g. the unit mass a peakon profile carries
    at its crest.
    """

    f: Callable
    f1: Callable
    f2: Callable
    label: str
    atoms: tuple = field(default=())


def _constant(c=1.0):
    return SmoothPeriodicDatum(
        f=lambda x: np.full_like(np.asarray(x, dtype=float), c),
        f1=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        f2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        label="constant")


def _sine():
    k = 2 * math.pi
    return SmoothPeriodicDatum(
        f=lambda x: np.sin(k * np.asarray(x)),
        f1=lambda x: k * np.cos(k * np.asarray(x)),
        f2=lambda x: -k * k * np.sin(k * np.asarray(x)),
        label="sin")


def _chi_bump(c=0.5, at=0.3):
    return SmoothPeriodicDatum(
        f=lambda x: c * chi(np.asarray(x) - at),
        f1=lambda x: c * chi_prime(np.asarray(x) - at),
        f2=lambda x: c * chi(np.asarray(x) - at),
        label="chi_bump",
        atoms=((at, c),))


CORPUS = {d.label: d for d in (_constant(), _sine(), _chi_bump())}


def get_datum(label: str) -> SmoothPeriodicDatum:
    try:
        return CORPUS[label]
    except KeyError:
        raise KeyError(f"unknown datum {label!r}; known: {sorted(CORPUS)}") from None


def multipeakon_approx(d: SmoothPeriodicDatum, n: int, order: int = 16) -> PeakonState:
    """N peakons at the cell midpoints with cell masses of ``(f - f'')/2``.

    Each atom of the datum adds one more peakon at its own location.
    """
    if n < 1:
        raise ValueError("need at least one peakon")
    t, w = gauss_legendre(order)
    edges = np.arange(n) / n
    x = edges[:, None] + t / n
    dens = 0.5 * (d.f(x) - d.f2(x))
    p = (dens * w).sum(axis=1) / n
    q = (2 * np.arange(1, n + 1) - 1) / (2 * n)
    if d.atoms:
        # point masses sit exactly where they are, not at a cell midpoint
        loc, weight = np.array(d.atoms, dtype=float).T
        p, q = np.concatenate([p, weight]), np.concatenate([q, loc])
    return PeakonState(p, q)


def approx_error(d: SmoothPeriodicDatum, s: PeakonState, panel_width: float = 1 / 64) -> float:
    """H^1 distance between the datum and the multipeakon profile of s."""
    kinks = [loc for loc, _ in d.atoms]
    x, w = panel_nodes(panel_breaks(s.q, kinks, max_width=panel_width))
    u, ux = profile(s, x)
    return float(np.sqrt(w @ ((d.f(x) - u) ** 2 + (d.f1(x) - ux) ** 2)))


def total_mass(d: SmoothPeriodicDatum, order: int = 16) -> float:
    """``int_0^1 (f - f'')/2`` including the atoms."""
    x, w = panel_nodes(panel_breaks(max_width=1 / 64), order)
    return float(w @ (0.5 * (d.f(x) - d.f2(x)))) + sum(a for _, a in d.atoms)
