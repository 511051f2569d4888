import numpy as np
import pytest

from IBNLSLab.core.grid import Field, make_weight
from IBNLSLab.core.integrator import HalvingPolicy, evolve, nonlinear_substep, strang_step
from IBNLSLab.core.propagator import make_symbol, linear_evolve
from IBNLSLab.errors import ConfigInvalid
from IBNLSLab.models.records import IntegratorConfig, COMPLETED, RESOLUTION_LOST, ENERGY_DRIFT, ADAPT_HALVE


@pytest.fixture(scope="module")
def sym_1d(grid_1d, params_1d):
    return make_symbol(grid_1d, params_1d.mu)


@pytest.fixture(scope="module")
def smooth_weight(grid_1d, params_1d):
    return make_weight(grid_1d, params_1d.b, 0.5)


@pytest.fixture(scope="module")
def u0(ground_state_1d):
    return ground_state_1d.field.scaled(0.8)


def test_nonlinear_substep_keeps_modulus(u0, params_1d, weight_1d):
    out = nonlinear_substep(u0, 0.3, params_1d, weight_1d)
    assert np.allclose(np.abs(out.values), np.abs(u0.values), rtol=0, atol=1e-15)


def test_strang_step_conserves_mass(u0, params_1d, weight_1d, sym_1d):
    out = strang_step(u0, 1e-2, params_1d, weight_1d, sym_1d)
    assert out.mass() == pytest.approx(u0.mass(), rel=1e-13)


def test_linear_mode_matches_exact_flow(u0, params_1d, weight_1d, sym_1d):
    cfg = IntegratorConfig(dt=1e-2, t_end=0.5, snapshot_stride=10, nonlinear=False)
    traj = evolve(u0, cfg, params_1d, weight_1d, sym_1d)
    exact = linear_evolve(u0, 0.5, sym_1d)
    assert traj.verdict == COMPLETED
    assert np.allclose(traj.final_state.field.values, exact.values, atol=1e-12)


def test_snapshot_layout(u0, params_1d, weight_1d, sym_1d):
    cfg = IntegratorConfig(dt=1e-3, t_end=0.05, snapshot_stride=10, keep_fields=False)
    traj = evolve(u0, cfg, params_1d, weight_1d, sym_1d)
    assert traj.times == pytest.approx([0.0, 0.01, 0.02, 0.03, 0.04, 0.05])
    assert traj.field_series() == []
    df = traj.to_dataframe()
    assert list(df.columns)[:6] == ["t", "M", "E", "S", "G", "P"]
    assert len(df) == 6


def test_mass_is_conserved_and_potential_accumulates(ground_state_1d, params_1d, weight_1d, sym_1d):
    q = ground_state_1d.field
    cfg = IntegratorConfig(dt=1e-3, t_end=0.5, snapshot_stride=50)
    traj = evolve(q, cfg, params_1d, weight_1d, sym_1d)
    assert traj.verdict == COMPLETED
    assert max(traj.mass_drift) < 1e-11
    # Q e^{it} is stationary in modulus, so P stays at P(Q)
    p0 = ground_state_1d.snapshot.potential
    assert traj.accumulated_potential[-1] == pytest.approx(0.5 * p0, rel=1e-4)


def gaussian(grid, amplitude, width=1.0):
    return Field.from_function(grid, lambda *xs: amplitude * np.exp(-sum(x * x for x in xs) / (2.0 * width ** 2)))


def test_strang_is_second_order(grid_1d, params_1d, smooth_weight, sym_1d):
    u0 = gaussian(grid_1d, 0.8)
    t_end, dt = 0.5, 1e-3
    finals = {}
    for step in (dt, dt / 2.0, dt / 8.0):
        cfg = IntegratorConfig(dt=step, t_end=t_end, snapshot_stride=int(round(t_end / step)))
        finals[step] = evolve(u0, cfg, params_1d, smooth_weight, sym_1d).final_state.field
    ref = finals[dt / 8.0].values
    coarse = Field(grid_1d, finals[dt].values - ref).l2()
    fine = Field(grid_1d, finals[dt / 2.0].values - ref).l2()
    assert 3.5 <= coarse / fine <= 4.5


@pytest.mark.slow
def test_gaussian_run_conserves_mass_and_energy(grid_1d, params_1d, weight_1d, sym_1d):
    u0 = gaussian(grid_1d, 0.5)
    cfg = IntegratorConfig(dt=1e-4, t_end=5.0, snapshot_stride=1000, keep_fields=False)
    traj = evolve(u0, cfg, params_1d, weight_1d, sym_1d)
    assert traj.verdict == COMPLETED
    assert traj.times[-1] == pytest.approx(5.0)
    assert max(traj.mass_drift) <= 1e-10
    assert max(traj.energy_drift) <= 1e-7
    # the Gaussian is not stationary: its potential falls as it disperses
    assert traj.snapshots[-1].potential < 0.5 * traj.snapshots[0].potential


def test_energy_drift_shrinks_with_dt(u0, params_1d, smooth_weight, sym_1d):
    drifts = []
    for dt in (4e-3, 2e-3):
        cfg = IntegratorConfig(dt=dt, t_end=0.4, snapshot_stride=25)
        drifts.append(max(evolve(u0, cfg, params_1d, smooth_weight, sym_1d).energy_drift))
    assert drifts[0] < 1e-2
    assert drifts[1] < 0.5 * drifts[0] or drifts[1] < 1e-10


def test_resume_is_bit_identical(u0, params_1d, weight_1d, sym_1d):
    full = evolve(u0, IntegratorConfig(dt=1e-3, t_end=0.2, snapshot_stride=20), params_1d, weight_1d, sym_1d)
    first = evolve(u0, IntegratorConfig(dt=1e-3, t_end=0.1, snapshot_stride=20), params_1d, weight_1d, sym_1d)
    second = evolve(u0, IntegratorConfig(dt=1e-3, t_end=0.2, snapshot_stride=20), params_1d, weight_1d, sym_1d,
                    resume_from=first.final_state)
    assert np.array_equal(second.final_state.field.values, full.final_state.field.values)
    assert second.final_state.accumulated_potential == full.final_state.accumulated_potential
    assert second.times[0] == pytest.approx(0.1)


def test_resume_rejects_other_dt(u0, params_1d, weight_1d, sym_1d):
    first = evolve(u0, IntegratorConfig(dt=1e-3, t_end=0.01, snapshot_stride=5), params_1d, weight_1d, sym_1d)
    with pytest.raises(ConfigInvalid):
        evolve(u0, IntegratorConfig(dt=5e-4, t_end=0.02), params_1d, weight_1d, sym_1d,
               resume_from=first.final_state)
    with pytest.raises(ConfigInvalid):
        evolve(u0, IntegratorConfig(dt=1e-3, t_end=0.01), params_1d, weight_1d, sym_1d,
               resume_from=first.final_state)


def test_energy_drift_gives_up_after_max_halvings(u0, params_1d, weight_1d, sym_1d):
    cfg = IntegratorConfig(dt=1e-2, t_end=0.1, snapshot_stride=5, adapt=ADAPT_HALVE,
                           drift_threshold=1e-15, max_halvings=2)
    traj = evolve(u0, cfg, params_1d, weight_1d, sym_1d)
    assert traj.verdict == ENERGY_DRIFT
    assert traj.halvings == 2
    assert traj.final_state.t < 0.1
    assert traj.step_sizes[-1] == pytest.approx(1e-2 / 4)


def test_resolution_loss_stops_the_run(u0, params_1d, weight_1d, sym_1d):
    cfg = IntegratorConfig(dt=1e-3, t_end=0.1, snapshot_stride=10, tail_limit=0.0)
    traj = evolve(u0, cfg, params_1d, weight_1d, sym_1d)
    assert traj.verdict == RESOLUTION_LOST
    assert traj.final_state.t == pytest.approx(0.01)


@pytest.mark.parametrize("changes", [
    {"dt": 0.0},
    {"t_end": -1.0},
    {"snapshot_stride": 0},
    {"adapt": "sometimes"},
])
def test_invalid_integrator_config(u0, params_1d, weight_1d, sym_1d, changes):
    values = {"dt": 1e-3, "t_end": 0.01}
    values.update(changes)
    with pytest.raises(ConfigInvalid):
        evolve(u0, IntegratorConfig(**values), params_1d, weight_1d, sym_1d)


def test_non_finite_step_is_not_recorded(u0, params_1d, weight_1d, sym_1d):
    bad = Field(u0.grid, np.where(np.abs(u0.grid.axis) < 1.0, np.nan, u0.values))
    traj = evolve(bad, IntegratorConfig(dt=1e-3, t_end=0.01, snapshot_stride=5), params_1d, weight_1d, sym_1d)
    assert traj.verdict == RESOLUTION_LOST
    assert traj.times == [0.0]
    assert traj.final_state.t == 0.0


def test_halving_restarts_from_the_base_step():
    cfg = IntegratorConfig(dt=1e-3, t_end=1.0, adapt=ADAPT_HALVE, drift_threshold=1e-6, max_halvings=2)
    policy = HalvingPolicy(cfg)
    assert policy.retry(1e-5) and policy.factor == 2
    assert policy.retry(1e-5) and policy.factor == 4
    assert not policy.retry(1e-5)
    policy.accept()
    assert policy.factor == 1 and policy.most == 2
    assert not policy.retry(1e-7)
    assert not HalvingPolicy(IntegratorConfig(dt=1e-3, t_end=1.0)).retry(1.0)


def test_step_sizes_follow_the_accepted_chunks(u0, params_1d, weight_1d, sym_1d):
    calm = evolve(u0, IntegratorConfig(dt=1e-3, t_end=0.02, snapshot_stride=5, adapt=ADAPT_HALVE,
                                       drift_threshold=1.0), params_1d, weight_1d, sym_1d)
    assert calm.step_sizes == [1e-3] * 5
    assert calm.halvings == 0
    assert calm.to_dataframe()["dt"].tolist() == [1e-3] * 5
