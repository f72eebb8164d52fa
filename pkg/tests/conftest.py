import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from chpeakon.kernel import PeakonState

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def peakon_states(draw, n_min=1, n_max=5, p_max=2.0, min_gap=1e-3, positive=False):
    n = draw(st.integers(n_min, n_max))
    lo = 0.05 if positive else -p_max
    p = draw(st.lists(st.floats(lo, p_max), min_size=n, max_size=n))
    q = draw(st.lists(st.floats(0.0, 0.999), min_size=n, max_size=n))
    s = PeakonState(np.array(p), np.array(q))
    if n >= 2 and s.min_gap() < min_gap:
        # spread the points out instead of rejecting the draw
        base = np.sort(np.array(q))
        q = base[0] + np.arange(n) * max(min_gap, 1.0 / (2 * n)) + 0.0
        s = PeakonState(np.array(p), q)
    return s
