import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from widthlab.extend import (
    SampledLipschitzMap,
    kirszbraun_eval,
    kirszbraun_eval_batch,
    lipschitz_audit,
    load_map,
    mcshane_eval,
    metric_projection_compose,
    sample_pairs,
    save_map,
)
from widthlab.spaces import FiniteNormedSpace, ModelClassSurrogate, norm, pairwise_distances


def fit_gamma(xs, fs, domain_p, target_p, slack=1e-9):
    """Smallest budget making (xs, fs) a valid Lipschitz sample set."""
    dx = pairwise_distances(xs, domain_p)
    df = pairwise_distances(fs, target_p)
    mask = dx > 0
    return float(np.max(df[mask] / dx[mask])) * (1.0 + slack) + slack


@st.composite
def sample_sets(draw, target_p=2.0, strategy="kirszbraun"):
    count = draw(st.integers(min_value=2, max_value=8))
    dim_in = draw(st.integers(min_value=1, max_value=4))
    dim_out = draw(st.integers(min_value=1, max_value=3))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    domain_p = draw(st.sampled_from([1.0, 2.0, math.inf])) \
        if strategy == "mcshane" else 2.0
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((count, dim_in))
    while np.unique(xs, axis=0).shape[0] < count:
        xs = rng.standard_normal((count, dim_in))
    fs = rng.standard_normal((count, dim_out))
    gamma = fit_gamma(xs, fs, domain_p, target_p)
    return SampledLipschitzMap(
        domain_space=FiniteNormedSpace(dim_in, domain_p),
        target_space=FiniteNormedSpace(dim_out, target_p),
        xs=xs, fs=fs, gamma=gamma, strategy=strategy,
    )


def test_mcshane_midpoint_oracle():
    map_ = SampledLipschitzMap(
        domain_space=FiniteNormedSpace(1, 2.0),
        target_space=FiniteNormedSpace(1, math.inf),
        xs=np.array([[0.0], [1.0]]),
        fs=np.array([[0.0], [1.0]]),
        gamma=1.0, strategy="mcshane",
    )
    assert mcshane_eval(map_, np.array([0.5]))[0] == pytest.approx(0.5)
    # outside the hull the lower cone from the nearest sample wins
    assert mcshane_eval(map_, np.array([2.0]))[0] == pytest.approx(2.0)


def test_kirszbraun_two_ball_oracle():
    # constraints |y - 0| <= 1 and |y - 2| <= 1 intersect only at y = 1
    map_ = SampledLipschitzMap(
        domain_space=FiniteNormedSpace(1, 2.0),
        target_space=FiniteNormedSpace(1, 2.0),
        xs=np.array([[-1.0], [1.0]]),
        fs=np.array([[0.0], [2.0]]),
        gamma=1.0,
    )
    got = kirszbraun_eval(map_, np.array([0.0]), tol=1e-10)
    assert got[0] == pytest.approx(1.0, abs=1e-6)


def test_sample_set_validation_rejects_bad_budget():
    with pytest.raises(ValueError):
        SampledLipschitzMap(
            domain_space=FiniteNormedSpace(1, 2.0),
            target_space=FiniteNormedSpace(1, 2.0),
            xs=np.array([[0.0], [1.0]]),
            fs=np.array([[0.0], [2.0]]),
            gamma=1.0,
        )
    with pytest.raises(ValueError):
        SampledLipschitzMap(
            domain_space=FiniteNormedSpace(1, 2.0),
            target_space=FiniteNormedSpace(1, 2.0),
            xs=np.array([[0.0], [0.0]]),
            fs=np.array([[0.0], [0.0]]),
            gamma=1.0,
        )


@given(sample_sets(target_p=math.inf, strategy="mcshane"))
def test_mcshane_reproduces_samples(map_):
    for x, f in zip(map_.xs, map_.fs):
        assert np.max(np.abs(mcshane_eval(map_, x) - f)) <= 1e-12


@given(sample_sets(target_p=math.inf, strategy="mcshane"),
       st.integers(min_value=0, max_value=2**31 - 1))
def test_mcshane_keeps_the_budget(map_, seed):
    pairs = sample_pairs(map_.xs, 60, seed=seed, jitter=0.7)
    audit = lipschitz_audit(lambda x: mcshane_eval(map_, x), pairs,
                            map_.domain_space, map_.target_space)
    assert audit.measured <= map_.gamma + 1e-9


@given(sample_sets())
def test_kirszbraun_reproduces_samples(map_):
    for x, f in zip(map_.xs, map_.fs):
        got = kirszbraun_eval(map_, x, tol=1e-8)
        assert float(np.linalg.norm(got - f)) <= 1e-7


@given(sample_sets(), st.integers(min_value=0, max_value=2**31 - 1))
def test_kirszbraun_feasibility_residual(map_, seed):
    rng = np.random.default_rng(seed)
    for x in rng.standard_normal((5, map_.domain_space.dim)) * 2.0:
        y = kirszbraun_eval(map_, x, tol=1e-8)
        gaps = (np.linalg.norm(y[None, :] - map_.fs, axis=1)
                - map_.gamma * np.linalg.norm(x[None, :] - map_.xs, axis=1))
        assert float(np.max(gaps)) <= 1e-6


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_kirszbraun_scalar_interval_consistency(seed):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.standard_normal(6))[:, None]
    fs = rng.standard_normal((6, 1))
    gamma = fit_gamma(xs, fs, 2.0, 2.0)
    map_ = SampledLipschitzMap(
        domain_space=FiniteNormedSpace(1, 2.0),
        target_space=FiniteNormedSpace(1, 2.0),
        xs=xs, fs=fs, gamma=gamma,
    )
    for x in rng.uniform(-3, 3, size=4):
        y = float(kirszbraun_eval(map_, np.array([x]), tol=1e-10)[0])
        radii = gamma * np.abs(x - xs[:, 0])
        lo = float(np.max(fs[:, 0] - radii))
        hi = float(np.min(fs[:, 0] + radii))
        assert lo - 1e-6 <= y <= hi + 1e-6


@given(sample_sets(), st.integers(min_value=0, max_value=2**31 - 1))
def test_kirszbraun_batch_realizes_a_lipschitz_map(map_, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, map_.domain_space.dim)) * 1.5
    Y = kirszbraun_eval_batch(map_, X, tol=1e-8)
    dx = pairwise_distances(X, 2.0)
    dy = pairwise_distances(Y, 2.0)
    mask = dx > 1e-9
    ratio = float(np.max(dy[mask] / dx[mask])) if mask.any() else 0.0
    # accumulated queries stay within the budget up to the accepted slack
    assert ratio <= map_.gamma * (1.0 + 1e-3) + 1e-6


def test_kirszbraun_batch_matches_sequential_accumulation():
    map_ = SampledLipschitzMap(
        domain_space=FiniteNormedSpace(2, 2.0),
        target_space=FiniteNormedSpace(2, 2.0),
        xs=np.array([[0.0, 0.0], [1.0, 0.0]]),
        fs=np.array([[0.0, 0.0], [0.5, 0.5]]),
        gamma=1.0,
    )
    X = np.array([[0.5, 0.25], [2.0, -1.0], [-0.5, 0.5]])
    batched = kirszbraun_eval_batch(map_, X, tol=1e-9)
    assert batched.shape == (3, 2)
    independent = kirszbraun_eval_batch(map_, X, tol=1e-9, accumulate=False)
    assert independent.shape == (3, 2)
    assert np.allclose(batched[0], independent[0], atol=1e-6)


def test_metric_projection_requires_convex_class():
    space = FiniteNormedSpace(1, 2.0)
    map_ = SampledLipschitzMap(
        domain_space=space, target_space=space,
        xs=np.array([[0.0], [1.0]]), fs=np.array([[0.0], [1.0]]),
        gamma=1.0, strategy="mcshane",
    )
    K = ModelClassSurrogate(space, np.array([[0.0], [1.0]]), convex=False)
    with pytest.raises(ValueError):
        metric_projection_compose(map_, K, np.array([0.2]))


def test_metric_projection_snaps_to_nearest_point():
    space = FiniteNormedSpace(1, 2.0)
    map_ = SampledLipschitzMap(
        domain_space=space, target_space=space,
        xs=np.array([[0.0], [1.0]]), fs=np.array([[0.0], [2.0]]),
        gamma=2.0, strategy="mcshane",
    )
    K = ModelClassSurrogate(space, np.array([[0.0], [1.0]]), convex=True)
    far = metric_projection_compose(map_, K, np.array([10.0]))
    assert far[0] == pytest.approx(2.0, abs=1e-9)
    near = metric_projection_compose(map_, K, np.array([0.1]))
    assert near[0] == pytest.approx(0.0, abs=1e-9)


def test_lipschitz_audit_exact_on_linear_map():
    rng = np.random.default_rng(5)
    pairs = sample_pairs(rng.standard_normal((30, 3)), 200, seed=1)
    space = FiniteNormedSpace(3, 2.0)
    audit = lipschitz_audit(lambda x: 2.0 * x, pairs, space, space)
    assert audit.measured == pytest.approx(2.0, abs=1e-9)
    assert audit.pair_count == 200
    x, y = audit.argmax_pair
    assert float(np.linalg.norm(x - y)) > 0


def test_lipschitz_audit_rejects_degenerate_pairs():
    space = FiniteNormedSpace(1, 2.0)
    with pytest.raises(ValueError):
        lipschitz_audit(lambda x: x, [], space, space)
    z = np.zeros(1)
    with pytest.raises(ValueError):
        lipschitz_audit(lambda x: x, [(z, z)], space, space)


def test_sample_pairs_deterministic():
    pts = np.random.default_rng(2).standard_normal((10, 2))
    a = sample_pairs(pts, 25, seed=11, jitter=0.1)
    b = sample_pairs(pts, 25, seed=11, jitter=0.1)
    assert all(np.array_equal(x1, x2) and np.array_equal(y1, y2)
               for (x1, y1), (x2, y2) in zip(a, b))
    assert len(a) == 25


def test_save_load_map_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    xs = rng.standard_normal((5, 2))
    fs = rng.standard_normal((5, 3))
    gamma = fit_gamma(xs, fs, 2.0, 2.0)
    map_ = SampledLipschitzMap(
        domain_space=FiniteNormedSpace(2, 2.0),
        target_space=FiniteNormedSpace(3, 2.0),
        xs=xs, fs=fs, gamma=gamma,
    )
    path = tmp_path / "map.csv"
    save_map(map_, path)
    back = load_map(path)
    assert np.array_equal(back.xs, map_.xs)
    assert np.array_equal(back.fs, map_.fs)
    assert back.gamma == map_.gamma
    assert back.strategy == map_.strategy
    assert back.domain_space == map_.domain_space
    assert back.target_space == map_.target_space
