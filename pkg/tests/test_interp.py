import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from widthlab.extend import lipschitz_audit, sample_pairs
from widthlab.interp import (
    KuhnMesh,
    MeshBudgetError,
    PLInterpolant,
    RadialCutoff,
    bump_kernel,
    cutoff_eval,
    cutoff_image_radius,
    finite_rank_pipeline,
    kuhn_simplices,
    kuhn_triangulate,
    mollify_on_grid,
    pl_eval,
    pl_eval_batch,
)
from widthlab.spaces import FiniteNormedSpace


def test_cutoff_known_values():
    cut = RadialCutoff(R1=1.0, lam=1.0, space=FiniteNormedSpace(2, 2.0))
    inside = np.array([0.3, -0.2])
    assert np.array_equal(cutoff_eval(cut, inside), inside)
    assert cutoff_eval(cut, np.array([1.5, 0.0])) == pytest.approx(
        np.array([0.75, 0.0]), abs=1e-12)
    assert np.array_equal(cutoff_eval(cut, np.array([3.0, 0.0])), np.zeros(2))


def test_cutoff_batch_matches_single():
    cut = RadialCutoff(R1=0.5, lam=2.0, space=FiniteNormedSpace(3, 2.0))
    X = np.random.default_rng(0).standard_normal((20, 3))
    batch = cutoff_eval(cut, X)
    for row_in, row_out in zip(X, batch):
        assert np.array_equal(cutoff_eval(cut, row_in), row_out)


def test_cutoff_image_radius_known_values():
    # profile r (1 - lam (r - R1)) peaks at (1 + lam R1)^2 / (4 lam)
    assert cutoff_image_radius(1.0, 1.0) == pytest.approx(1.0)
    assert cutoff_image_radius(1.0, 0.5) == pytest.approx(1.125)
    assert cutoff_image_radius(1.0, 4.0) == pytest.approx(1.0)


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_cutoff_image_stays_inside_reported_radius(seed):
    rng = np.random.default_rng(seed)
    R1, lam = float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.2, 3.0))
    cut = RadialCutoff(R1=R1, lam=lam, space=FiniteNormedSpace(2, 2.0))
    X = rng.standard_normal((200, 2)) * 3.0
    out_norms = np.linalg.norm(cutoff_eval(cut, X), axis=1)
    assert float(np.max(out_norms)) <= cutoff_image_radius(R1, lam) + 1e-9


@pytest.mark.parametrize("R1,lam", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.25)])
def test_cutoff_lipschitz_budget_audited(R1, lam):
    cut = RadialCutoff(R1=R1, lam=lam, space=FiniteNormedSpace(2, 2.0))
    anchors = np.random.default_rng(17).standard_normal((60, 2)) * (R1 + 1.0)
    pairs = sample_pairs(anchors, 10_000, seed=17, jitter=0.5 * R1)
    space = FiniteNormedSpace(2, 2.0)
    audit = lipschitz_audit(lambda x: cutoff_eval(cut, x), pairs, space, space)
    assert audit.measured <= 1.0 + lam * R1 + 1e-6


def test_kuhn_mesh_counts_oracle():
    mesh = kuhn_triangulate(2, 1.0, 2)
    assert mesh.points_per_axis == 3
    assert mesh.vertex_count == 9
    assert mesh.h == pytest.approx(1.0)
    simplices = list(kuhn_simplices(mesh))
    assert len(simplices) == 8  # 4 cells x 2! simplices
    assert mesh.simplex_count == 8


@pytest.mark.parametrize("n,subdiv", [(1, 4), (2, 3), (3, 2)])
def test_kuhn_mesh_tiles_the_cube(n, subdiv):
    D = 0.8
    mesh = kuhn_triangulate(n, D, subdiv)
    assert mesh.vertex_count == (subdiv + 1) ** n
    total = 0.0
    for simplex in kuhn_simplices(mesh):
        verts = -D + mesh.h * np.asarray(simplex, dtype=float)
        edges = verts[1:] - verts[0]
        total += abs(np.linalg.det(edges)) / math.factorial(n)
    assert total == pytest.approx((2.0 * D) ** n, rel=1e-12)


def grid_values(mesh: KuhnMesh, fn, d_out: int) -> np.ndarray:
    axes = [mesh.axis_coordinates() for _ in range(mesh.n)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return np.asarray([fn(p) for p in pts], dtype=float).reshape(-1, d_out)


def test_pl_reproduces_vertex_values_and_affine_maps():
    mesh = kuhn_triangulate(2, 1.0, 3)
    A = np.array([[0.5, -1.0], [2.0, 0.25], [0.0, 1.0]])
    b = np.array([0.1, -0.2, 0.3])
    affine = lambda x: A @ x + b
    f = PLInterpolant(mesh=mesh, values=grid_values(mesh, affine, 3),
                      outside_value=np.zeros(3))
    axes = mesh.axis_coordinates()
    for x0 in axes:
        for x1 in axes:
            v = np.array([x0, x1])
            assert pl_eval(f, v) == pytest.approx(affine(v), abs=1e-12)
    rng = np.random.default_rng(1)
    for x in rng.uniform(-1.0, 1.0, size=(50, 2)):
        assert pl_eval(f, x) == pytest.approx(affine(x), abs=1e-12)


def test_pl_outside_value_and_batch_consistency():
    mesh = kuhn_triangulate(2, 1.0, 2)
    f = PLInterpolant(mesh=mesh, values=grid_values(mesh, lambda x: x, 2),
                      outside_value=np.array([9.0, 9.0]))
    assert np.array_equal(pl_eval(f, np.array([1.5, 0.0])), [9.0, 9.0])
    X = np.random.default_rng(2).uniform(-1.4, 1.4, size=(40, 2))
    batch = pl_eval_batch(f, X)
    for x, row in zip(X, batch):
        assert np.array_equal(pl_eval(f, x), row)


def test_pl_rank_bound_counts_interior_vertices():
    mesh = kuhn_triangulate(2, 1.0, 4)
    f = PLInterpolant(mesh=mesh, values=grid_values(mesh, lambda x: x, 2),
                      outside_value=np.zeros(2))
    assert f.rank_bound == mesh.vertex_count + 1


def test_pl_continuous_across_shared_faces():
    mesh = kuhn_triangulate(2, 1.0, 4)
    wavy = lambda x: np.array([math.sin(3.0 * x[0]) * math.cos(2.0 * x[1])])
    f = PLInterpolant(mesh=mesh, values=grid_values(mesh, wavy, 1),
                      outside_value=np.zeros(1))
    rng = np.random.default_rng(3)
    axes = mesh.axis_coordinates()
    delta = 1e-12
    for _ in range(200):
        # a random point on a random interior grid plane, approached from
        # both sides along the plane normal
        axis = int(rng.integers(2))
        plane = float(axes[int(rng.integers(1, len(axes) - 1))])
        x = rng.uniform(-1.0 + 1e-6, 1.0 - 1e-6, size=2)
        x[axis] = plane
        step = np.zeros(2)
        step[axis] = delta
        left = pl_eval(f, x - step)
        right = pl_eval(f, x + step)
        assert float(np.max(np.abs(left - right))) <= 1e-10


def test_bump_kernel_normalization_and_moment():
    for m in (2.0, 8.0):
        for n in (1, 2):
            offsets, weights, moment = bump_kernel(m, n)
            assert weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(np.linalg.norm(offsets, axis=1) <= 1.0 / m + 1e-12)
            assert moment == pytest.approx(
                float(np.sum(weights * np.linalg.norm(offsets, axis=1))),
                abs=1e-15)
            assert 0.0 < moment <= 1.0 / m


def test_mollify_preserves_constants_and_respects_the_moment_bound():
    spacing = 1.0 / 64.0  # = 1/(4m) for m = 16
    m = 16.0
    grid = np.arange(-2.0, 2.0 + spacing / 2, spacing)
    const = np.full((len(grid), 1), 3.7)
    out = mollify_on_grid(const, spacing, m)
    assert out == pytest.approx(const, abs=1e-12)
    # 1-Lipschitz input: smoothing moves values at most by the first moment
    lipschitz_input = np.abs(grid)[:, None]
    smoothed = mollify_on_grid(lipschitz_input, spacing, m)
    _, _, moment = bump_kernel(m, 1)
    assert float(np.max(np.abs(smoothed - lipschitz_input))) <= moment + 1e-12


def test_mollify_rejects_coarse_grids():
    with pytest.raises(ValueError):
        mollify_on_grid(np.zeros((5, 1)), spacing=0.5, m=16.0)


def linear_demo(X):
    X = np.atleast_2d(X)
    return np.stack([0.5 * X[:, 0], -0.25 * X[:, 0]], axis=1)


def unit_wave(X):
    X = np.atleast_2d(X)
    return np.stack([np.sin(X[:, 0]), np.cos(X[:, 0])], axis=1)


def test_pipeline_linear_map_is_reproduced_cheaply():
    # delta sized so the final rescale penalty delta/(gamma+delta) * max|M|
    # stays well inside the eps budget
    S = np.linspace(-0.5, 0.5, 41)[:, None]
    result = finite_rank_pipeline(
        linear_demo, S, gamma=0.7, eps=0.02, delta=0.04,
        seed=0, initial_subdivisions=8, min_levels=1,
    )
    assert result.sup_dev_on_S <= 0.02
    assert result.lip_measured <= 0.7
    assert result.rank >= 1
    assert result.levels[-1].subdivisions >= 8


def test_pipeline_halves_the_mesh_and_reports_levels():
    S = np.linspace(-0.4, 0.4, 33)[:, None]
    result = finite_rank_pipeline(
        unit_wave, S, gamma=1.1, eps=0.05, delta=0.045,
        seed=1, initial_subdivisions=8, min_levels=3,
    )
    subdivisions = [lvl.subdivisions for lvl in result.levels]
    assert len(subdivisions) >= 3
    assert all(b == 2 * a for a, b in zip(subdivisions, subdivisions[1:]))
    hs = [lvl.h for lvl in result.levels]
    assert all(b == pytest.approx(a / 2.0) for a, b in zip(hs, hs[1:]))
    assert result.sup_dev_on_S <= 0.05
    assert result.lip_measured <= 1.1


def test_pipeline_smooth_audit_slope_is_quadratic():
    # single-frequency wave, unit budget: halving h divides the smooth
    # sup deviation by about four (slope 2 on a log-log fit)
    S = np.linspace(-0.45, 0.45, 61)[:, None]
    result = finite_rank_pipeline(
        unit_wave, S, gamma=1.12, eps=0.05, delta=0.04,
        seed=0, initial_subdivisions=16, min_levels=4,
    )
    tail = result.levels[-4:]
    log_h = np.log([lvl.h for lvl in tail])
    log_err = np.log([lvl.sup_err_smooth for lvl in tail])
    slope = float(np.polyfit(log_h, log_err, 1)[0])
    assert slope == pytest.approx(2.0, abs=0.3)


def test_pipeline_budget_exhaustion_raises():
    S = np.linspace(-0.4, 0.4, 9)[:, None]
    fast_wave = lambda X: np.sin(4.0 * np.atleast_2d(X)[:, :1])
    with pytest.raises(MeshBudgetError) as info:
        finite_rank_pipeline(
            fast_wave, S, gamma=4.2, eps=1e-4, delta=0.05,
            seed=0, initial_subdivisions=4, min_levels=1, max_vertices=64,
        )
    assert info.value.achieved_dev > 0
    assert info.value.vertices > 64
