import numpy as np
import pytest

from pass2d.model import EventArrays

PTYPE = [1.05, 0.4, 0.3, 0.9, 0.7, 0.9, 0.027, 0.8, 0.006]


def random_arrays(n: int, seed: int = 0, shuffle_unums: bool = True) -> EventArrays:
    """Valid events with players spread uniformly over the pitch.

    Unlike the synthetic generator there is no formation, and slot order
    has nothing to do with uniform number when ``shuffle_unums`` is set.
    """
    rng = np.random.default_rng(seed)
    a = EventArrays.empty(n)
    a.cycle[:] = rng.integers(0, 6001, n)
    a.tm_pos[:] = rng.uniform([-52, -34], [52, 34], (n, 11, 2))
    a.opp_pos[:] = rng.uniform([-52, -34], [52, 34], (n, 11, 2))
    a.tm_vel[:] = rng.uniform(-1, 1, (n, 11, 2))
    a.opp_vel[:] = rng.uniform(-1, 1, (n, 11, 2))
    a.tm_body[:] = rng.uniform(-179.9, 180, (n, 11))
    a.opp_body[:] = rng.uniform(-179.9, 180, (n, 11))
    a.tm_ptype[:] = PTYPE
    a.opp_ptype[:] = PTYPE
    a.ball_vel[:] = rng.uniform(-1, 1, (n, 2))
    for i in range(n):
        if shuffle_unums:
            a.tm_unum[i] = rng.permutation(11) + 1
            a.opp_unum[i] = rng.permutation(11) + 1
        else:
            a.tm_unum[i] = a.opp_unum[i] = np.arange(1, 12)
        k = rng.integers(11)
        r = (k + 1 + rng.integers(10)) % 11
        a.kicker_slot[i], a.receiver_slot[i] = k, r
        off = rng.uniform(-0.5, 0.5, 2)
        a.ball_pos[i] = a.tm_pos[i, k] + off
    return a


def tied_arrays(n: int, seed: int = 0) -> EventArrays:
    """Events on a coarse integer grid, so equal angles and distances are common."""
    rng = np.random.default_rng(seed)
    a = random_arrays(n, seed)
    for i in range(n):
        while True:
            tm = rng.integers(-6, 7, (11, 2)).astype(float) * 4
            opp = rng.integers(-6, 7, (11, 2)).astype(float) * 4
            pts = {tuple(p) for p in tm}
            if len(pts) == 11:
                break
        a.tm_pos[i], a.opp_pos[i] = tm, opp
        a.ball_pos[i] = tm[a.kicker_slot[i]]
    return a


@pytest.fixture(scope="session")
def arrays_1000():
    return random_arrays(1000, seed=12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
