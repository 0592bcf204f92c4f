import numpy as np
import pytest
from scipy.special import expit

from peergeo.aggregators.norms import exposure, panel_exposure
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.equilibrium import (
    StructuralParams,
    ces_lipschitz,
    certifying_shift,
    contraction_bound,
    draw_shocks,
    equilibrium_envelope,
    iterate_fixed_point,
    logit_fixed_point,
    solve_equilibrium,
    structural_base,
)
from peergeo.errors import DomainError, UnsupportedOperationError
from peergeo.netcore.network import row_normalize
from peergeo.netcore.panel import Panel


def _one_group(make_network, n: int, seed: int) -> Panel:
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.uniform(0.5, 2.0, size=n)])
    return Panel(groups=(make_network(n, seed=seed),), X=X)


# -----------------------------
# Solver
# -----------------------------

def test_zero_peer_effect_returns_base_in_one_iteration(make_panel) -> None:
    panel = make_panel()
    params = StructuralParams(np.array([0.5, 1.0]), 0.0, AggregatorSpec(Family.CES, 2.0), group_effects=np.array([1.0, 2.0, 3.0]))
    shocks = np.random.default_rng(0).normal(size=panel.n)
    y, report = solve_equilibrium(panel, params, shocks)
    np.testing.assert_array_equal(y, structural_base(panel, params, shocks))
    assert report.iterations == 1 and report.converged


def test_lim_matches_dense_linear_solve(make_network) -> None:
    rng = np.random.default_rng(1)
    for trial in range(50):
        n = int(rng.integers(2, 51))
        panel = _one_group(make_network, n, seed=trial)
        lam = float(rng.uniform(-0.9, 0.9))
        gamma = rng.normal(size=2)
        zeta = rng.normal(size=1)
        shocks = rng.normal(size=n)
        params = StructuralParams(gamma, lam, AggregatorSpec(Family.LIM), group_effects=zeta)
        y, report = solve_equilibrium(panel, params, shocks, tol=1e-12, max_iter=5000)
        G = panel.groups[0].weights
        oracle = np.linalg.solve(np.eye(n) - lam * G, panel.X @ gamma + zeta[0] + shocks)
        assert report.converged
        np.testing.assert_allclose(y, oracle, rtol=0.0, atol=1e-8)


def test_smoothmax_converges_with_certificate(make_panel) -> None:
    panel = make_panel()
    params = StructuralParams(np.array([0.0, 1.0]), 0.9, AggregatorSpec(Family.SMOOTHMAX, 2.0))
    y, report = solve_equilibrium(panel, params, np.random.default_rng(2).normal(size=panel.n), max_iter=2000)
    assert report.converged
    assert report.contraction_bound == pytest.approx(0.9)
    assert report.unique


def test_fixed_point_residual_is_within_tolerance(make_panel) -> None:
    panel = make_panel(seed=3)
    spec = AggregatorSpec(Family.CES, 1.5, shift=5.0)
    params = StructuralParams(np.array([1.0, 1.0]), 0.4, spec)
    shocks = np.random.default_rng(3).normal(size=panel.n)
    tol = 1e-10
    y, report = solve_equilibrium(panel, params, shocks, tol=tol)
    residual = y - (structural_base(panel, params, shocks) + 0.4 * panel_exposure(panel, y, spec))
    assert report.converged
    assert report.final_residual <= tol
    assert np.abs(residual).max() <= tol * (1.0 + np.abs(y).max())


def test_contraction_gives_the_same_point_from_any_start(make_panel) -> None:
    panel = make_panel(seed=4)
    params = StructuralParams(np.array([0.5, 1.0]), 0.6, AggregatorSpec(Family.SMOOTHMAX, 1.5))
    rng = np.random.default_rng(4)
    shocks = rng.normal(size=panel.n)
    reference, _ = solve_equilibrium(panel, params, shocks, tol=1e-12, max_iter=2000)
    for _ in range(20):
        y, report = solve_equilibrium(panel, params, shocks, tol=1e-12, max_iter=2000, start=rng.normal(size=panel.n) * 5.0)
        assert report.converged
        np.testing.assert_allclose(y, reference, rtol=0.0, atol=1e-10)


def test_ces_domain_exit_names_iteration_and_node(make_network) -> None:
    panel = _one_group(make_network, 6, seed=5)
    params = StructuralParams(np.array([1.0, 0.0]), 0.3, AggregatorSpec(Family.CES, 2.0))
    with pytest.raises(DomainError) as err:
        solve_equilibrium(panel, params, np.full(6, -10.0))
    assert err.value.iteration == 2
    assert err.value.group == 0
    assert err.value.node is not None


def test_nonconvergence_is_reported_not_raised(make_panel) -> None:
    panel = make_panel()
    params = StructuralParams(np.array([0.0, 1.0]), 0.9, AggregatorSpec(Family.LIM))
    y, report = solve_equilibrium(panel, params, np.ones(panel.n), max_iter=3)
    assert not report.converged
    assert report.iterations == 3
    assert report.final_residual > 1e-10
    assert np.all(np.isfinite(y))


def test_shock_length_is_checked(make_panel) -> None:
    panel = make_panel()
    params = StructuralParams(np.array([0.0, 1.0]), 0.5, AggregatorSpec(Family.LIM))
    with pytest.raises(DomainError):
        solve_equilibrium(panel, params, np.zeros(panel.n + 1))


def test_damping_rescues_an_oscillating_map() -> None:
    y, iterations, residual, converged, damped = iterate_fixed_point(
        lambda v, t: 2.0 - v, np.zeros(1), tol=1e-10, max_iter=500
    )
    assert converged and damped
    assert y[0] == pytest.approx(1.0)
    assert iterations < 500


# -----------------------------
# Contraction bound
# -----------------------------

def test_contraction_bound_examples() -> None:
    assert contraction_bound(StructuralParams(np.zeros(1), 0.5, AggregatorSpec(Family.LIM))) == 0.5
    assert contraction_bound(StructuralParams(np.zeros(1), 1.2, AggregatorSpec(Family.SMOOTHMAX, 3.0))) == pytest.approx(1.2)
    ces = StructuralParams(np.zeros(1), 0.4, AggregatorSpec(Family.CES, 2.0))
    assert contraction_bound(ces, (1.0, 2.0)) == pytest.approx(0.8)
    with pytest.raises(DomainError):
        contraction_bound(ces)


@pytest.mark.parametrize("beta", [-1.0, 0.5, 2.0, 3.5])
def test_ces_lipschitz_matches_numerical_maximum(beta) -> None:
    grid = np.linspace(1.0, 2.0, 201)
    ratio = grid[:, None] / grid[None, :]
    numerical = np.max(ratio ** (beta - 1.0))
    assert ces_lipschitz(1.0, 2.0, beta) == pytest.approx(numerical, rel=1e-12)


@pytest.mark.parametrize("beta", [0.8, 2.0, 3.0])
def test_certifying_shift_reaches_the_target(beta) -> None:
    lower, upper = -40.0, 60.0
    c = certifying_shift(lower, upper, beta, 0.7, 0.95)
    assert lower + c > 0.0
    assert 0.7 * ces_lipschitz(lower + c, upper + c, beta) == pytest.approx(0.95, rel=1e-10)


def test_certifying_shift_edge_cases() -> None:
    assert certifying_shift(1.0, 2.0, 1.0, 0.7, 0.95) == 0.0
    assert certifying_shift(5.0, 5.5, 2.0, 0.7, 0.95) == 0.0
    assert certifying_shift(1.0, 2.0, 2.0, 0.96, 0.95) == float("inf")
    with pytest.raises(DomainError):
        certifying_shift(1.0, 2.0, 2.0, 0.5, 1.0)


def test_ces_lipschitz_bounds_the_jacobian_row_sums(make_network) -> None:
    from peergeo.aggregators.jacobian import jacobian

    rng = np.random.default_rng(6)
    for trial in range(10):
        net = make_network(8, seed=trial)
        a = rng.uniform(1.0, 3.0, size=8)
        for beta in (0.4, 2.5):
            W = jacobian(net, a, AggregatorSpec(Family.CES, beta))
            assert W.sum(axis=1).max() <= ces_lipschitz(1.0, 3.0, beta) + 1e-12


# -----------------------------
# Logit
# -----------------------------

def test_logit_without_peer_effect(make_panel) -> None:
    panel = make_panel()
    gamma = np.array([-0.5, 0.8])
    p, report = logit_fixed_point(panel, gamma, 0.0, AggregatorSpec(Family.SMOOTHMAX, 1.0))
    np.testing.assert_allclose(p, expit(panel.X @ gamma))
    assert report.iterations == 1


def test_logit_strong_peer_effect_converges_in_unit_interval(make_panel) -> None:
    panel = make_panel(seed=7)
    p, report = logit_fixed_point(panel, np.array([-1.0, 1.0]), 3.9, AggregatorSpec(Family.SMOOTHMAX, 2.0), max_iter=5000)
    assert report.converged and report.unique
    assert report.contraction_bound == pytest.approx(0.975)
    assert np.all((p >= 0.0) & (p <= 1.0))


def test_logit_symmetric_pair() -> None:
    net = row_normalize(np.array([[0.0, 1.0], [1.0, 0.0]]))
    panel = Panel(groups=(net,), X=np.zeros((2, 1)))
    p, report = logit_fixed_point(panel, np.zeros(1), 1.0, AggregatorSpec(Family.SMOOTHMAX, 1.0), tol=1e-13)
    assert report.converged
    assert p[0] == pytest.approx(p[1], abs=1e-12)
    # the symmetric fixed point solves p = Λ(p)
    assert p[0] == pytest.approx(expit(p[0]), abs=1e-10)
    assert p[0] == pytest.approx(0.6590, abs=1e-4)


def test_logit_rejects_quantile(make_panel) -> None:
    with pytest.raises(UnsupportedOperationError):
        logit_fixed_point(make_panel(), np.zeros(2), 1.0, AggregatorSpec(Family.QUANTILE, 0.5))


# -----------------------------
# Shocks
# -----------------------------

def test_draw_shocks_is_seeded(make_panel) -> None:
    panel = make_panel()
    a = draw_shocks(panel, 1.0, np.random.default_rng(9))
    b = draw_shocks(panel, 1.0, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(draw_shocks(panel, 0.0, np.random.default_rng(9)), 0.0)


def test_correlated_shocks_share_a_group_component() -> None:
    groups = tuple(row_normalize(np.ones((4, 4)) - np.eye(4), group_id=s) for s in range(2000))
    panel = Panel(groups=groups, X=np.ones((8000, 1)))
    eps = draw_shocks(panel, 2.0, np.random.default_rng(10), correlated=True, group_share=0.5)
    assert eps.var() == pytest.approx(4.0, rel=0.1)
    by_group = eps.reshape(2000, 4)
    within = np.mean(by_group[:, 0] * by_group[:, 1])
    assert within == pytest.approx(2.0, rel=0.2)


def test_exposure_of_solution_is_consistent(make_panel) -> None:
    panel = make_panel(seed=12)
    spec = AggregatorSpec(Family.SMOOTHMAX, 0.7)
    params = StructuralParams(np.array([0.0, 1.0]), 0.5, spec)
    y, _ = solve_equilibrium(panel, params, np.zeros(panel.n), tol=1e-12)
    net, sl = next(panel.iter_groups())
    np.testing.assert_allclose(y[sl], panel.X[sl, 1] + 0.5 * exposure(net, y[sl], spec).filled(), atol=1e-10)


@pytest.mark.parametrize("lam", [0.6, -0.6])
def test_solution_stays_inside_the_envelope(make_panel, lam) -> None:
    panel = make_panel(seed=13)
    params = StructuralParams(np.array([0.5, 1.0]), lam, AggregatorSpec(Family.SMOOTHMAX, 1.5))
    shocks = np.random.default_rng(13).normal(size=panel.n)
    start = panel.X @ params.gamma
    lower, upper = equilibrium_envelope(structural_base(panel, params, shocks), lam, start)
    y, report = solve_equilibrium(panel, params, shocks, tol=1e-12, max_iter=2000)
    assert report.converged
    assert lower - 1e-12 <= y.min() and y.max() <= upper + 1e-12
    assert lower <= start.min() and start.max() <= upper


def test_envelope_needs_a_contracting_coefficient() -> None:
    assert equilibrium_envelope(np.ones(3), 1.0) is None
    assert equilibrium_envelope(np.ones(3), 0.5) == (1.0, 2.0)
