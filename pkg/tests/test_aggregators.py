import numpy as np
import pytest

from peergeo.aggregators.derivatives import dtheta_exposure
from peergeo.aggregators.jacobian import jacobian, quantile_influence
from peergeo.aggregators.norms import check_loss, default_shift, exposure, quasi_arithmetic_mean
from peergeo.aggregators.spec import AggregatorSpec, Family
from peergeo.errors import DomainError, FiniteDifferenceWarning, UnsupportedOperationError
from peergeo.netcore.network import Network, row_normalize


def _fan(weights) -> Network:
    """Node 0 looks at nodes 1..m with the given weights; the others are isolates."""
    m = len(weights)
    W = np.zeros((m + 1, m + 1))
    W[0, 1:] = weights
    return Network(group_id=0, weights=W, row_normalized=True)


def _phi0(weights, peers, spec: AggregatorSpec) -> float:
    return float(exposure(_fan(weights), np.r_[1.0, peers], spec).values[0])


# -----------------------------
# Spec
# -----------------------------

@pytest.mark.parametrize(
    "family, theta",
    [("ces", 0.0), ("smoothmax", 0.0), ("smoothmax", -1.0), ("quantile", 1.0), ("quantile", 0.0), ("ces", None)],
)
def test_spec_rejects_out_of_domain_theta(family, theta) -> None:
    with pytest.raises(DomainError):
        AggregatorSpec(family, theta)


def test_family_parse_aliases() -> None:
    assert Family.parse("SmoothMax") is Family.SMOOTHMAX
    assert Family.parse("linear-in-means") is Family.LIM
    assert AggregatorSpec("lim", 3.0).theta is None
    with pytest.raises(DomainError):
        Family.parse("geometric")


# -----------------------------
# Exposure
# -----------------------------

def test_ces_unit_curvature_is_the_mean() -> None:
    assert _phi0([0.5, 0.5], [2.0, 4.0], AggregatorSpec(Family.CES, 1.0)) == pytest.approx(3.0, abs=1e-12)


def test_smoothmax_idempotent() -> None:
    for kappa in (0.1, 1.0, 25.0):
        assert _phi0([0.2, 0.3, 0.5], [7.0, 7.0, 7.0], AggregatorSpec(Family.SMOOTHMAX, kappa)) == pytest.approx(7.0, abs=1e-10)


def test_quantile_median_matches_check_loss_grid() -> None:
    weights, peers = np.full(3, 1.0 / 3.0), np.array([1.0, 2.0, 3.0])
    value = _phi0(weights, peers, AggregatorSpec(Family.QUANTILE, 0.5))
    assert value == 2.0

    grid = np.linspace(0.0, 4.0, 4001)
    loss = [np.sum(weights * check_loss(peers - t, 0.5)) for t in grid]
    assert grid[int(np.argmin(loss))] == pytest.approx(value, abs=1e-3)


def test_quantile_equals_check_loss_minimizer_on_random_instances() -> None:
    rng = np.random.default_rng(11)
    grid = np.linspace(0.0, 10.0, 10001)
    for _ in range(20):
        m = int(rng.integers(2, 7))
        weights = rng.dirichlet(np.ones(m))
        peers = np.round(rng.uniform(0.0, 10.0, size=m), 3)
        q = float(rng.uniform(0.1, 0.9))
        value = _phi0(weights, peers, AggregatorSpec(Family.QUANTILE, q))
        loss = np.array([np.sum(weights * check_loss(peers - t, q)) for t in grid])
        # the weighted quantile is one of the minimizers of the check loss
        assert np.sum(weights * check_loss(peers - value, q)) <= loss.min() + 1e-9


def test_ces_large_curvature_approaches_max() -> None:
    assert _phi0([0.5, 0.5], [1.0, 5.0], AggregatorSpec(Family.CES, 200.0)) == pytest.approx(5.0, abs=0.05)


def test_ces_shift_keeps_outcome_units() -> None:
    spec = AggregatorSpec(Family.CES, 2.0, shift=3.0)
    value = _phi0([0.5, 0.5], [-1.0, 1.0], spec)
    assert value == pytest.approx(np.sqrt(0.5 * 4.0 + 0.5 * 16.0) - 3.0)


def test_ces_outside_domain_raises() -> None:
    with pytest.raises(DomainError) as err:
        exposure(_fan([0.5, 0.5]), np.array([1.0, -2.0, 1.0]), AggregatorSpec(Family.CES, 2.0, shift=1.0))
    assert err.value.node == 1


def test_isolates_have_no_exposure() -> None:
    out = exposure(_fan([1.0]), np.array([1.0, 2.0]), AggregatorSpec(Family.LIM))
    assert out.defined_mask.tolist() == [True, False]
    assert np.isnan(out.values[1])
    assert out.filled().tolist() == [2.0, 0.0]


def test_quasi_arithmetic_mean_reproduces_ces(make_network) -> None:
    net = make_network(8, seed=2)
    a = np.random.default_rng(2).uniform(0.5, 5.0, size=8)
    beta = 1.7
    qam = quasi_arithmetic_mean(net, a, lambda v: v ** beta, lambda v: v ** (1.0 / beta))
    np.testing.assert_allclose(qam.values, exposure(net, a, AggregatorSpec(Family.CES, beta)).values, rtol=1e-12)


def test_monotone_in_each_peer(make_network) -> None:
    rng = np.random.default_rng(4)
    specs = [
        AggregatorSpec(Family.LIM),
        AggregatorSpec(Family.CES, 1.5),
        AggregatorSpec(Family.CES, -0.7),
        AggregatorSpec(Family.SMOOTHMAX, 2.0),
        AggregatorSpec(Family.QUANTILE, 0.3),
    ]
    for trial in range(10):
        net = make_network(7, seed=trial)
        a = rng.uniform(0.5, 5.0, size=7)
        j = int(rng.integers(7))
        bumped = a.copy()
        bumped[j] += rng.uniform(0.0, 2.0)
        for spec in specs:
            before, after = exposure(net, a, spec).values, exposure(net, bumped, spec).values
            assert np.all(after >= before - 1e-12)


def test_smoothmax_is_one_lipschitz(make_network) -> None:
    rng = np.random.default_rng(5)
    for trial in range(20):
        net = make_network(9, seed=trial)
        spec = AggregatorSpec(Family.SMOOTHMAX, float(rng.uniform(0.1, 10.0)))
        a, b = rng.normal(size=9) * 3.0, rng.normal(size=9) * 3.0
        gap = np.abs(exposure(net, a, spec).values - exposure(net, b, spec).values)
        assert gap.max() <= np.abs(a - b).max() + 1e-12


def test_ces_between_peer_extremes_and_increasing_in_beta(make_network) -> None:
    rng = np.random.default_rng(6)
    betas = (-3.0, -0.5, 0.5, 1.0, 2.0, 6.0)
    for trial in range(10):
        net = make_network(8, seed=trial)
        a = rng.uniform(0.5, 5.0, size=8)
        values = np.array([exposure(net, a, AggregatorSpec(Family.CES, b)).values for b in betas])
        for i in range(8):
            peers = a[net.peers(i)]
            assert np.all(values[:, i] >= peers.min() - 1e-12)
            assert np.all(values[:, i] <= peers.max() + 1e-12)
        assert np.all(np.diff(values, axis=0) >= -1e-12)


def test_default_shift() -> None:
    assert default_shift(np.array([2.0, 3.0])) == 0.0
    assert default_shift(np.array([-1.5, 3.0])) == pytest.approx(2.5)
    assert default_shift(np.array([np.nan, 0.25])) == pytest.approx(0.75)


# -----------------------------
# Jacobian and influence
# -----------------------------

def test_lim_jacobian_is_g(make_network) -> None:
    net = make_network(6)
    np.testing.assert_array_equal(jacobian(net, np.arange(6.0), AggregatorSpec(Family.LIM)), net.weights)


def test_ces_jacobian_hand_values() -> None:
    W = jacobian(_fan([0.5, 0.5]), np.array([1.0, 1.0, 2.0]), AggregatorSpec(Family.CES, 2.0))
    np.testing.assert_allclose(W[0], [0.0, 0.5 / np.sqrt(2.5), 1.0 / np.sqrt(2.5)], rtol=1e-12)
    np.testing.assert_allclose(W[0, 1:], [0.31622776601683794, 0.6324555320336759], rtol=1e-12)


def test_smoothmax_jacobian_rows_sum_to_one(make_network) -> None:
    rng = np.random.default_rng(7)
    for trial in range(10):
        net = make_network(10, seed=trial)
        W = jacobian(net, rng.normal(size=10) * 4.0, AggregatorSpec(Family.SMOOTHMAX, float(rng.uniform(0.1, 5.0))))
        np.testing.assert_allclose(W.sum(axis=1), 1.0, rtol=0.0, atol=1e-12)
        assert np.all(W[net.weights == 0.0] == 0.0)


def _finite_difference_jacobian(net: Network, a: np.ndarray, spec: AggregatorSpec, h: float = 1e-6) -> np.ndarray:
    out = np.zeros((net.n, net.n))
    for j in range(net.n):
        up, down = a.copy(), a.copy()
        up[j] += h
        down[j] -= h
        out[:, j] = (exposure(net, up, spec).values - exposure(net, down, spec).values) / (2.0 * h)
    return out


def test_jacobian_matches_finite_differences(make_network) -> None:
    rng = np.random.default_rng(8)
    for trial in range(40):
        n = int(rng.integers(3, 11))
        net = make_network(n, seed=100 + trial, density=0.5)
        a = rng.uniform(0.5, 5.0, size=n)
        if trial % 2:
            spec = AggregatorSpec(Family.SMOOTHMAX, float(rng.uniform(0.1, 3.0)))
        else:
            spec = AggregatorSpec(Family.CES, float(rng.choice([-1.5, 0.5, 1.3, 2.0, 3.0])))
        np.testing.assert_allclose(jacobian(net, a, spec), _finite_difference_jacobian(net, a, spec), rtol=1e-6, atol=1e-8)


def test_quantile_has_no_jacobian() -> None:
    with pytest.raises(UnsupportedOperationError):
        jacobian(_fan([1.0]), np.array([1.0, 2.0]), AggregatorSpec(Family.QUANTILE, 0.5))


def test_quantile_influence_selection() -> None:
    distinct = quantile_influence(_fan([0.2, 0.2, 0.6]), np.array([0.0, 1.0, 2.0, 3.0]), 0.5)
    assert distinct[0].tolist() == [0.0, 0.0, 0.0, 1.0]

    tied = quantile_influence(_fan([1 / 3, 1 / 3, 1 / 3]), np.array([0.0, 2.0, 2.0, 5.0]), 0.5)
    assert tied[0].tolist() == [0.0, 0.5, 0.5, 0.0]


def test_quantile_influence_one_entry_per_row(make_network) -> None:
    net = make_network(9, seed=9)
    W = quantile_influence(net, np.random.default_rng(9).normal(size=9), 0.5)
    assert np.all((W > 0).sum(axis=1) == 1)
    np.testing.assert_array_equal(W.sum(axis=1), 1.0)


# -----------------------------
# θ-derivatives
# -----------------------------

def test_dtheta_vanishes_for_single_peer_and_equal_peers() -> None:
    spec = AggregatorSpec(Family.CES, 1.2)
    single = dtheta_exposure(_fan([1.0]), np.array([1.0, 3.0]), spec)
    assert abs(single.values[0]) < 1e-10
    equal = dtheta_exposure(_fan([0.3, 0.7]), np.array([1.0, 2.5, 2.5]), spec)
    assert abs(equal.values[0]) < 1e-10


def test_dtheta_matches_richardson_oracle() -> None:
    net, a = _fan([0.5, 0.5]), np.array([1.0, 1.0, 4.0])

    def phi(beta: float) -> float:
        return float(exposure(net, a, AggregatorSpec(Family.CES, beta)).values[0])

    def central(h: float) -> float:
        return (phi(1.2 + h) - phi(1.2 - h)) / (2.0 * h)

    oracle = (4.0 * central(5e-3) - central(1e-2)) / 3.0
    got = dtheta_exposure(net, a, AggregatorSpec(Family.CES, 1.2)).values[0]
    assert got == pytest.approx(oracle, abs=1e-6)
    assert got > 0.0


def test_dtheta_one_sided_near_the_domain_edge() -> None:
    with pytest.warns(FiniteDifferenceWarning):
        d = dtheta_exposure(_fan([0.5, 0.5]), np.array([0.0, 1.0, 2.0]), AggregatorSpec(Family.SMOOTHMAX, 5e-5))
    assert d.one_sided
    assert np.isfinite(d.values[0])


def test_dtheta_family_restrictions() -> None:
    net, a = _fan([1.0]), np.array([1.0, 2.0])
    with pytest.raises(UnsupportedOperationError):
        dtheta_exposure(net, a, AggregatorSpec(Family.LIM))
    with pytest.raises(UnsupportedOperationError):
        dtheta_exposure(net, a, AggregatorSpec(Family.QUANTILE, 0.5))
    d = dtheta_exposure(net, a, AggregatorSpec(Family.QUANTILE, 0.5), allow_quantile=True)
    assert d.values[0] == 0.0


def test_row_normalize_then_exposure_in_group_of_isolates() -> None:
    net = row_normalize(np.zeros((3, 3)))
    out = exposure(net, np.ones(3), AggregatorSpec(Family.SMOOTHMAX, 1.0))
    assert not out.defined_mask.any()
