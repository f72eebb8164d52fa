"""Peakon meets antipeakon: where the energy goes at the crossing and how it comes back.

Run: python3 demos/collision_energy.py
"""

import numpy as np

from chpeakon import PeakonState, energy, evolve


def main():
    s0 = PeakonState([1.0, -1.0], [0.4, 0.6])
    traj = evolve(s0, 3.0)
    (ev,) = traj.events
    print(f"collision at t={ev.tau:.6f}, x={ev.qbar:.6f}, energy atom {ev.atom:.6f}")
    print(f"{'t':>8} {'N':>3} {'E(profile)':>12} {'E+atom':>12}")
    for t in sorted(set(np.linspace(0, 3, 13)) | {ev.tau}):
        s = traj.state_at(float(t))
        atom = ev.atom if abs(t - ev.tau) < 1e-12 else 0.0
        print(f"{t:8.4f} {len(s):3d} {energy(s):12.6f} {energy(s) + atom:12.6f}")


if __name__ == "__main__":
    main()
