import numpy as np
import pytest

from qshaping.mdp import Mdp, chain_mdp, grid_mdp

# q* of the 3-state chain (gamma 0.9), from a dict-based brute-force iteration that does not
# use the library.
CHAIN3_Q_STAR = np.array([[0.81, 0.9], [0.81, 1.0], [0.0, 0.0]])


@pytest.fixture
def chain3():
    return chain_mdp(3, 0.9)


@pytest.fixture
def grid4():
    return grid_mdp(4, 4, 0.9)


def random_mdp(rng, n_s, n_a, gamma):
    trans = rng.random((n_s, n_a, n_s)) + 1e-3
    trans /= trans.sum(-1, keepdims=True)
    init = rng.random(n_s) + 1e-3
    return Mdp(rng.random((n_s, n_a)), trans, gamma, init / init.sum())


def relu_pattern(net, x):
    """Which hidden units are active; a change means a perturbation crossed a kink."""
    acts, _ = net.forward_cached(x)[1]
    return b"".join(np.packbits(a > 0).tobytes() for a in acts[1:-1])


def finite_difference(f, flat, h=1e-5, pattern=None):
    """Central differences of scalar ``f()`` w.r.t. each entry of the mutable array ``flat``.

    With ``pattern`` given, coordinates whose +-h probe changes ``pattern()`` straddle a relu
    kink and come back as NaN.
    """
    out = np.zeros_like(flat)
    base = pattern() if pattern else None
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        kink = pattern is not None and pattern() != base
        flat[i] = old - h
        down = f()
        kink = kink or (pattern is not None and pattern() != base)
        flat[i] = old
        out[i] = np.nan if kink else (up - down) / (2 * h)
    return out


def max_relative_error(analytic, numeric, floor=1e-6, max_skipped=0.1):
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    keep = ~np.isnan(numeric)
    assert keep.mean() >= 1 - max_skipped, "too many coordinates straddle a relu kink"
    analytic, numeric = analytic[keep], numeric[keep]
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


# criterion id -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")
