"""Two nearby three-peakon solutions and the transport-distance bounds between them.

Run: python3 demos/stability_bounds.py
"""

import numpy as np

from chpeakon import PeakonState, evolve, h1_distance, j_bounds


def main():
    u0 = PeakonState([1.0, 0.6, 0.8], [0.1, 0.45, 0.7])
    v0 = PeakonState(u0.p * 1.0002, u0.q + 1e-4)
    tu, tv = evolve(u0, 1.0), evolve(v0, 1.0)
    print(f"{'t':>5} {'lower':>10} {'upper':>10} {'H1 dist':>10}")
    for t in np.linspace(0, 1, 6):
        u, v = tu.state_at(float(t)), tv.state_at(float(t))
        rep = j_bounds(u, v, budget=1)
        print(f"{t:5.2f} {rep.lower:10.3e} {rep.upper:10.3e} {h1_distance(u, v):10.3e}")


if __name__ == "__main__":
    main()
