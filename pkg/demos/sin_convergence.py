"""Multipeakon approximations of sin(2 pi x) and how fast they close in.

Run: python3 demos/sin_convergence.py
"""

from chpeakon import approx_error, evolve, get_datum, multipeakon_approx


def main():
    d = get_datum("sin")
    prev = None
    print(f"{'N':>4} {'H1 error':>11} {'ratio':>7} {'sum p':>10}")
    for n in (4, 8, 16, 32, 64, 128):
        s = multipeakon_approx(d, n)
        err = approx_error(d, s)
        ratio = f"{err / prev:7.3f}" if prev else " " * 7
        print(f"{n:4d} {err:11.3e} {ratio} {s.p.sum():10.2e}")
        prev = err
    # the approximation is itself a solution, so it can be pushed forward
    traj = evolve(multipeakon_approx(d, 16), 0.5)
    print(f"N=16 evolved to t=0.5: {len(traj.events)} collisions, "
          f"H drift {abs(traj.hamiltonian_at(0.5) - traj.hamiltonian_at(0.0)):.1e}")


if __name__ == "__main__":
    main()
