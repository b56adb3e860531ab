from dataclasses import replace
import numpy as np
import pytest
from scipy.special import ndtri
from conftest import location_model, fixed_model, identity_statistic, manual_bank
from ReproDP import depth
from ReproDP.engine import ParamBox, draw_seed_bank, draw_observation
from ReproDP.errors import (InvalidArgumentError, InfeasibleBandError,
        ReproNumericError, UnboundedGridError)
from ReproDP.inference import (choose_band, accept, AcceptanceSearch,
        optimize_rank, OptimizerSpec, confidence_interval, confidence_grid,
        pvalue, overcoverage_relative_width, MAX_DOUBLINGS, QUASI_NEWTON)
from ReproDP.models import mann_whitney

UNIT = ParamBox([0.0], [10.0], ('x',))

# =====
# BANDS
# =====

@pytest.mark.parametrize('alpha, R, side, a, b', [
    (0.05, 199, depth.LOW_UNUSUAL, 11, 200),
    (0.05, 999, depth.TWO_SIDED, 25, 974),
    (0.5, 1, depth.LOW_UNUSUAL, 2, 2),
    (0.05, 199, depth.HIGH_UNUSUAL, 1, 190),
    (0.05, 19, depth.TWO_SIDED, 1, 19),
])
def test_choose_band(alpha, R, side, a, b):

    band = choose_band(alpha, R, side)

    assert (band.a, band.b) == (a, b)
    assert 1 <= band.a <= band.b <= R + 1
    assert band.b - band.a >= np.ceil((1 - alpha) * (R + 1)) - 1

def test_choose_band_infeasible():

    with pytest.raises(InfeasibleBandError):
        choose_band(0.01, 19)
    with pytest.raises(InvalidArgumentError):
        choose_band(1.0, 19)

def test_band_covers_exchangeable_rank():

    band = choose_band(0.1, 19, depth.TWO_SIDED)
    u = np.random.default_rng(0).random((20000, 20))
    rank = (u <= u[:, -1:]).sum(axis=1)

    inside = np.mean((rank >= band.a) & (rank <= band.b))
    assert inside >= (band.b - band.a + 1) / 20 - 3 * np.sqrt(0.9 * 0.1 / 20000)

# ======
# ACCEPT
# ======

SPREAD = np.linspace(0.05, 0.95, 19)

def test_accept_maximal_observation():

    assert accept([0.5], 0.05, manual_bank(SPREAD), fixed_model(),
            identity_statistic(), [5.0])

def test_reject_minimal_observation():

    assert not accept([0.5], 0.05, manual_bank(SPREAD), fixed_model(),
            identity_statistic(), [ndtri(0.3)])

def test_accept_box_agrees_with_grid(location, location_bank):

    stat = location.default_statistic
    grid = np.linspace(-10, 10, 41)
    singles = [accept([g], 0.05, location_bank, location, stat, [0.0]) for g in grid]

    assert any(singles)
    assert accept(location.param_box, 0.05, location_bank, location, stat, [0.0])

    far = location.param_box.restrict(0, 8.0, 10.0)
    assert not any(s for g, s in zip(grid, singles) if g >= 8)
    assert not accept(far, 0.05, location_bank, location, stat, [0.0])

def test_accept_matches_pvalue_on_singletons(location, location_bank):

    stat = location.default_statistic
    n = location_bank.R + 1

    for theta in np.linspace(-4, 4, 17):
        accepted = accept([theta], 0.05, location_bank, location, stat, [0.3])
        p = pvalue([theta], location_bank, location, stat, [0.3]).p
        assert accepted == (p > np.floor(0.05 * n) / n)

def test_acceptance_search_keeps_anchors(location, location_bank):

    search = AcceptanceSearch(location, location.default_statistic, [0.0],
            location_bank, 0.05)
    decision = search.run(location.param_box)

    assert decision.accepted
    assert search.calls == 1
    assert len(search.anchors) == 1
    assert location.param_box.contains(decision.theta)

def test_acceptance_search_reuses_evaluations(location_bank):

    calls = []
    base = location_model()
    model = replace(base, generator=lambda theta, data, dp:
            calls.append(1) or base.generator(theta, data, dp))

    search = AcceptanceSearch(model, model.default_statistic, [0.0],
            location_bank, 0.05)
    far = model.param_box.restrict(0, 8.0, 10.0)

    assert not search.run(far).accepted
    first = len(calls)
    assert not search.run(far).accepted

    assert first > 0
    assert len(calls) == first
    assert search.evaluations > first

# =========
# OPTIMIZER
# =========

def test_optimizer_constant_objective():

    best = optimize_rank(lambda theta: 4.0, UNIT, warm_starts=[[2.5]])

    assert best.value == 4.0
    assert best.theta.tolist() == [2.5]

def test_optimizer_concave_objective():

    best = optimize_rank(lambda theta: -(theta[0] - 3)**2, UNIT)
    assert best.theta[0] == pytest.approx(3.0, abs=1e-4)

def test_optimizer_quasi_newton():

    best = optimize_rank(lambda theta: -(theta[0] - 3)**2, UNIT,
            OptimizerSpec(method=QUASI_NEWTON))
    assert best.theta[0] == pytest.approx(3.0, abs=1e-2)

def test_optimizer_stops_at_target():

    best = optimize_rank(lambda theta: theta[0], UNIT, target=5.0)

    assert best.hit_target
    assert best.value >= 5.0

def test_optimizer_improves_on_warm_start():

    objective = lambda theta: np.floor(theta[0]) + 0.1 * np.sin(theta[0])
    best = optimize_rank(objective, UNIT, warm_starts=[[1.2]])

    assert best.value >= objective(np.array([1.2]))
    assert UNIT.contains(best.theta)

def test_optimizer_is_deterministic():

    objective = lambda theta: np.sin(3 * theta[0]) + np.cos(theta[1])
    region = ParamBox([0.0, 0.0], [5.0, 5.0], ('a', 'b'))

    first = optimize_rank(objective, region, seed=3)
    second = optimize_rank(objective, region, seed=3)

    assert np.array_equal(first.theta, second.theta)
    assert first.evaluations == second.evaluations

def test_optimizer_all_evaluations_fail():

    def broken(theta):
        raise ReproNumericError('boom', theta)

    with pytest.raises(ReproNumericError):
        optimize_rank(broken, UNIT)
    with pytest.raises(ReproNumericError):
        optimize_rank(lambda theta: np.nan, UNIT)

def test_optimizer_enumerates_integers():

    region = ParamBox([0.0, 1.0], [1.0, 6.0], ('p', 'n'), integer=(False, True))
    best = optimize_rank(lambda t: -(t[0] - 0.3)**2 - (t[1] - 4)**2, region)

    assert best.theta[1] == 4.0
    assert best.theta[0] == pytest.approx(0.3, abs=1e-4)

def test_optimizer_integer_limits():

    with pytest.raises(InvalidArgumentError):
        optimize_rank(lambda t: 0.0,
                ParamBox([1.0], [1e6], ('n',), integer=(True,)))
    with pytest.raises(InvalidArgumentError):
        optimize_rank(lambda t: 0.0,
                ParamBox([0.2], [0.8], ('n',), integer=(True,)))

def test_optimizer_spec_validation():

    with pytest.raises(InvalidArgumentError):
        OptimizerSpec(n_starts=0)
    with pytest.raises(InvalidArgumentError):
        OptimizerSpec(method='simulated_annealing')

    paranoid = OptimizerSpec.paranoid()
    assert paranoid.n_starts == 32
    assert paranoid.max_evals == 1000
    assert paranoid.lattice == 9

# ===================
# CONFIDENCE INTERVAL
# ===================

def test_interval_for_location(location, location_bank):

    ci = confidence_interval(0.05, location.param_box, location_bank,
            location, location.default_statistic, [0.0], tol=1e-2)

    assert not ci.empty
    assert -4 < ci.lower < -1
    assert 1 < ci.upper < 4
    assert ci.coord == 'mu'
    assert ci.R == 99 and ci.master_seed == 1234
    assert ci.accept_calls > 2
    assert ci.contains(0.0)

def test_interval_encloses_accepted_grid(location, location_bank):

    stat, tol, pitch = location.default_statistic, 1e-2, 0.1
    ci = confidence_interval(0.05, location.param_box, location_bank,
            location, stat, [0.0], tol=tol)

    grid = np.arange(-4, 4 + pitch / 2, pitch)
    hits = [g for g in grid if accept([g], 0.05, location_bank, location, stat, [0.0])]

    assert ci.lower <= min(hits) + 1e-9
    assert ci.upper >= max(hits) - 1e-9
    assert ci.width < max(hits) - min(hits) + 2 * tol + 2 * pitch

def test_intervals_nest_in_alpha(location, location_bank):

    stat = location.default_statistic
    wide = confidence_interval(0.05, location.param_box, location_bank,
            location, stat, [0.5], tol=1e-2)
    narrow = confidence_interval(0.3, location.param_box, location_bank,
            location, stat, [0.5], tol=1e-2)

    assert wide.lower <= narrow.lower + 1e-2
    assert narrow.upper <= wide.upper + 1e-2

def test_interval_empty_when_nothing_accepted():

    model = fixed_model()
    ci = confidence_interval(0.05, model.param_box, manual_bank(SPREAD),
            model, identity_statistic(), [-10.0])

    assert ci.empty
    assert ci.width is None
    assert np.isnan(ci.lower) and np.isnan(ci.upper)
    assert not ci.contains(0.5)

def test_interval_reaches_finite_bounds():

    model = fixed_model()
    ci = confidence_interval(0.05, model.param_box, manual_bank(SPREAD),
            model, identity_statistic(), [0.5])

    assert (ci.lower, ci.upper) == (0.0, 1.0)

def test_interval_unbounded_after_doubling():

    model = fixed_model(-np.inf, np.inf)
    ci = confidence_interval(0.05, model.param_box, manual_bank(SPREAD),
            model, identity_statistic(), [0.5])

    assert ci.lower == -np.inf
    assert ci.upper == np.inf
    assert ci.accept_calls == 2 * MAX_DOUBLINGS + 1

def test_interval_argument_checks(location, location_bank):

    with pytest.raises(InvalidArgumentError):
        confidence_interval(0.05, location.param_box, location_bank, location,
                location.default_statistic, [0.0], tol=np.nan)

    model = fixed_model()
    box = ParamBox([1.0], [5.0], ('n',), integer=(True,))
    with pytest.raises(InvalidArgumentError):
        confidence_interval(0.05, box, manual_bank(SPREAD), model,
                identity_statistic(), [0.5])

# ====
# GRID
# ====

def test_grid_cells_lie_in_bounding_box():

    model = location_model(dim=2)
    bank = draw_seed_bank(model, 99, 5)
    grid = confidence_grid(0.05, model.param_box, bank, model,
            model.default_statistic, [0.0, 0.0], r=4, tol=1e-2)

    lower, upper = grid.bounding_box
    assert grid.resolution == 4
    assert 0 < len(grid.cells) <= 16
    assert len(grid.intervals) == 2
    for lo, hi in grid.cells:
        assert np.all(lo >= lower - 1e-12) and np.all(hi <= upper + 1e-12)

    centers = [tuple((lo + hi) / 2) for lo, hi in grid.cells]
    assert len(set(centers)) == len(centers)
    assert 0 < grid.area <= np.prod(upper - lower) + 1e-9

    # the cell around the observed release is always kept
    assert any(np.all(lo <= 0) and np.all(hi >= 0) for lo, hi in grid.cells)

def test_grid_single_cell_is_bounding_box():

    model = fixed_model()
    grid = confidence_grid(0.05, model.param_box, manual_bank(SPREAD), model,
            identity_statistic(), [0.5], r=1)

    assert len(grid.cells) == 1
    lo, hi = grid.cells[0]
    assert lo.tolist() == [0.0] and hi.tolist() == [1.0]

def test_grid_empty():

    model = fixed_model()
    grid = confidence_grid(0.05, model.param_box, manual_bank(SPREAD), model,
            identity_statistic(), [-10.0], r=3)

    assert grid.cells == ()
    assert grid.bounding_box is None
    assert grid.area == 0.0

def test_grid_rejects_unbounded_intervals():

    model = fixed_model(-np.inf, np.inf)
    with pytest.raises(UnboundedGridError):
        confidence_grid(0.05, model.param_box, manual_bank(SPREAD), model,
                identity_statistic(), [0.5], r=2)

def test_grid_resolution_check():

    model = fixed_model()
    with pytest.raises(InvalidArgumentError):
        confidence_grid(0.05, model.param_box, manual_bank(SPREAD), model,
                identity_statistic(), [0.5], r=0)

# =======
# P-VALUE
# =======

LOW_HALF = np.linspace(0.05, 0.45, 9)

def test_pvalue_at_maximal_rank():

    result = pvalue([0.5], manual_bank(LOW_HALF), fixed_model(),
            identity_statistic(), [ndtri(0.8)])

    assert result.M == pytest.approx(9.8)
    assert float(result) == pytest.approx(1.0)

def test_pvalue_at_minimal_rank():

    result = pvalue([0.5], manual_bank(LOW_HALF), fixed_model(),
            identity_statistic(), [ndtri(0.3)])

    assert result.M == pytest.approx(0.3)
    assert result.p == pytest.approx(0.1)
    assert not result.early_stopped

def test_pvalue_high_unusual():

    stat = depth.TestStatistic('identity', depth.HIGH_UNUSUAL,
            lambda theta, P: P[:, 0], lambda s: np.clip(s, 0, 1))
    result = pvalue([0.5], manual_bank(LOW_HALF), fixed_model(), stat, [0.0])

    assert result.p == pytest.approx(1.0)

def test_pvalue_early_stop(location, location_bank):

    result = pvalue(location.param_box, location_bank, location,
            location.default_statistic, [0.0], significance=0.05)

    assert result.early_stopped
    assert result.p > 0.05

def test_pvalue_argument_checks(location, location_bank):

    with pytest.raises(InvalidArgumentError):
        pvalue([0.0], location_bank, location,
                depth.scalar_statistic(depth.TWO_SIDED), [0.0])
    with pytest.raises(InvalidArgumentError):
        pvalue(None, location_bank, location, location.default_statistic, [0.0])

@pytest.mark.parametrize('R', [9, 19, 99])
def test_pvalue_is_super_uniform(R):

    model = location_model()
    stat = model.default_statistic
    p = np.array([
        pvalue([0.0], draw_seed_bank(model, R, i), model, stat,
            draw_observation(model, [0.0], i)).p
        for i in range(1000)])

    for level in (0.1, 0.2, 0.5):
        assert np.mean(p <= level) <= level + 3 * np.sqrt(level * (1 - level) / 1000)

def test_pvalue_over_integer_grid_is_exhaustive_maximum():

    model = mann_whitney(20, 0.3, 0.7)
    stat = model.default_statistic
    bank = draw_seed_bank(model, 99, 41)
    s_obs = draw_observation(model, [4], 42)

    singles = [pvalue([m], bank, model, stat, s_obs).p for m in range(1, 11)]
    result = pvalue(model.param_box, bank, model, stat, s_obs)

    assert result.p == pytest.approx(max(singles))
    assert result.theta_hat[0] in range(1, 11)

# ============
# OVERCOVERAGE
# ============

def test_overcoverage_relative_width():

    assert overcoverage_relative_width(0.05, 1) == pytest.approx(1.0)
    assert overcoverage_relative_width(0.05, 2) == pytest.approx(1.14, abs=5e-3)
    assert overcoverage_relative_width(0.05, 1000) == pytest.approx(2.07, abs=1e-2)

    with pytest.raises(InvalidArgumentError):
        overcoverage_relative_width(0.05, 0)
