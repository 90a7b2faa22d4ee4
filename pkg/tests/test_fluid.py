import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import water_fill
from vtnroute import fluid

BACKENDS = sorted(fluid.backends())


@st.composite
def instances(draw, max_links=6, max_flows=10):
    n_links = draw(st.integers(1, max_links))
    cap = [draw(st.integers(1, 20)) for _ in range(n_links)]
    n_flows = draw(st.integers(1, max_flows))
    paths = [
        sorted(draw(st.sets(st.integers(0, n_links - 1), min_size=1, max_size=n_links)))
        for _ in range(n_flows)
    ]
    return cap, paths


def assert_certificate(cap, paths, rates, rtol=1e-9):
    # every flow crosses a saturated link on which no other flow gets more
    for f, p in enumerate(paths):
        ok = False
        for l in p:
            load = sum(rates[g] for g, q in enumerate(paths) if l in q)
            top = max(rates[g] for g, q in enumerate(paths) if l in q)
            if math.isclose(load, cap[l], rel_tol=rtol) and rates[f] >= top * (1 - rtol):
                ok = True
        assert ok, f"flow {f} has no bottleneck"


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=120, deadline=None)
@given(inst=instances())
def test_maxmin_matches_exact_water_filling(backend, inst):
    cap, paths = inst
    exact = water_fill(cap, paths)
    got = fluid.maxmin_rates(cap, paths, impl=fluid.backends()[backend])
    for g, e in zip(got, exact):
        assert math.isclose(g, float(e), rel_tol=1e-9)
    assert_certificate(cap, paths, got)
    for l, c in enumerate(cap):
        assert sum(got[f] for f, p in enumerate(paths) if l in p) <= c * (1 + 1e-9)


@settings(max_examples=100, deadline=None)
@given(inst=instances(max_links=8, max_flows=14), seed=st.integers(0, 2**32))
def test_every_epoch_conserves_and_is_maxmin(inst, seed):
    cap, paths = inst
    rng = np.random.default_rng(seed)
    sizes = rng.uniform(1, 50, len(paths))
    starts = np.round(rng.uniform(0, 3, len(paths)), 1)
    finish, epochs = fluid.simulate(cap, paths, sizes, starts, record=True)
    assert epochs
    for t, ids, rates in epochs:
        r = dict(zip(ids, rates))
        for l, c in enumerate(cap):
            assert sum(r[f] for f in ids if l in paths[f]) <= c * (1 + 1e-9)
        sub = [paths[f] for f in ids]
        exact = water_fill(cap, sub)
        for f, e in zip(ids, exact):
            assert math.isclose(r[f], float(e), rel_tol=1e-9)
    for f, (s, t0) in enumerate(zip(sizes, starts)):
        # physical lower bound: alone on its narrowest link
        assert finish[f] - t0 >= s / min(cap[l] for l in paths[f]) * (1 - 1e-9)


@settings(max_examples=80, deadline=None)
@given(inst=instances(max_links=8, max_flows=14), seed=st.integers(0, 2**32))
def test_backends_agree(inst, seed):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    cap, paths = inst
    rng = np.random.default_rng(seed)
    sizes = rng.uniform(1, 50, len(paths))
    starts = rng.uniform(0, 3, len(paths))
    a, _ = fluid.simulate(cap, paths, sizes, starts, impl=fluid.backends()["python"])
    b, _ = fluid.simulate(cap, paths, sizes, starts, impl=fluid.backends()["cython"])
    np.testing.assert_allclose(a, b, rtol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_trivial_examples(backend):
    impl = fluid.backends()[backend]
    f, _ = fluid.simulate([1e9], [[0]], [1e9], [0.0], impl=impl)
    assert f[0] == pytest.approx(1.0)
    f, _ = fluid.simulate([1e9], [[0], [0]], [1e9, 1e9], [0.0, 0.0], impl=impl)
    assert list(f) == pytest.approx([2.0, 2.0])
    f, _ = fluid.simulate([0.5e9], [[0]], [1e9], [0.0], impl=impl)
    assert f[0] == pytest.approx(2.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_capacity_starves(backend):
    impl = fluid.backends()[backend]
    f, _ = fluid.simulate([0.0, 1.0], [[0, 1], [1]], [1.0, 1.0], [0.0, 0.0], impl=impl)
    assert math.isinf(f[0]) and f[1] == pytest.approx(1.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_empty_path_and_zero_size_finish_at_start(backend):
    impl = fluid.backends()[backend]
    f, _ = fluid.simulate([1.0], [[], [0]], [5.0, 0.0], [1.5, 2.0], impl=impl)
    assert list(f) == [1.5, 2.0]


def test_late_arrival_shares_then_speeds_up():
    # A alone for 1s at rate 1, then shares with B
    f, _ = fluid.simulate([1.0], [[0], [0]], [2.0, 0.5], [0.0, 1.0])
    # at t=1 A has 1 left, both at 0.5: B done at 2.0, A then alone with 0.5 left -> 2.5
    assert list(f) == pytest.approx([2.5, 2.0])


def test_idle_gap_between_flows():
    f, _ = fluid.simulate([1.0], [[0], [0]], [1.0, 1.0], [0.0, 5.0])
    assert list(f) == pytest.approx([1.0, 6.0])


@settings(max_examples=80, deadline=None)
@given(inst=instances(max_links=6, max_flows=10), seed=st.integers(0, 2**32), grow=st.floats(1.0, 10.0))
def test_enlarged_flow_never_finishes_earlier(inst, seed, grow):
    cap, paths = inst
    rng = np.random.default_rng(seed)
    sizes = rng.uniform(1, 20, len(paths))
    starts = rng.uniform(0, 2, len(paths))
    k = int(rng.integers(len(paths)))
    before, _ = fluid.simulate(cap, paths, sizes, starts)
    sizes[k] *= grow
    after, _ = fluid.simulate(cap, paths, sizes, starts)
    assert after[k] >= before[k] * (1 - 1e-12)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32), grow=st.floats(1.0, 10.0))
def test_single_bottleneck_is_monotone_for_everyone(n, seed, grow):
    rng = np.random.default_rng(seed)
    sizes = rng.uniform(1, 20, n)
    starts = rng.uniform(0, 2, n)
    k = int(rng.integers(n))
    before, _ = fluid.simulate([3.0], [[0]] * n, sizes, starts)
    sizes[k] *= grow
    after, _ = fluid.simulate([3.0], [[0]] * n, sizes, starts)
    assert np.all(after >= before * (1 - 1e-12))


def test_enlarging_a_flow_can_speed_up_another():
    # L0 (cap 1): A, B.  L1 (cap 1): B, C, D.  B, C, D get 1/3, A gets 2/3.
    # When C finishes B rises to 1/2 and A drops to 1/2; a bigger C keeps A at 2/3 longer.
    cap = [1.0, 1.0]
    paths = [[0], [0, 1], [1], [1]]
    small, _ = fluid.simulate(cap, paths, [2.0, 10.0, 0.5, 10.0], [0.0] * 4)
    large, _ = fluid.simulate(cap, paths, [2.0, 10.0, 5.0, 10.0], [0.0] * 4)
    assert large[0] < small[0]


def test_to_csr():
    ptr, links = fluid.to_csr([[1, 2], [], [0]])
    assert list(ptr) == [0, 2, 2, 3] and list(links) == [1, 2, 0]
    assert fluid.BACKEND in fluid.backends()
