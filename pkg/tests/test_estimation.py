import numpy as np
import pytest

import mricath.estimation as est
from mricath import ActuationInput, ExternalLoads, io
from mricath.estimation import (PEBAX35, AllRecordsFailed, Observation, ObservationSet, estimate_parameters,
                                predict_tips, protocol_loads, synthesize_observations, three_sweep_protocol)

FREE = ("E", "G", "theta_x", "theta_y")
BOUNDS = {"E": (1.0, 100.0), "G": (0.5, 50.0), "theta_x": (2.0, 4.5), "theta_y": (-1.5, 1.5)}
PERTURBED = PEBAX35.with_values(FREE, [31.03 * 1.2, 8.11 * 0.8, 3.25 + 0.15, 0.06 - 0.1])


@pytest.fixture(scope="module")
def protocol(pebax):
    loads = protocol_loads()
    inputs = three_sweep_protocol(pebax)
    return loads, inputs, synthesize_observations(pebax, PEBAX35, inputs, loads)


def test_protocol_shape(pebax):
    inputs = three_sweep_protocol(pebax)
    assert len(inputs) == 18
    axial = np.array([z.currents[0] for z in inputs[:6]])
    assert np.all(axial[:, :2] == 0) and np.all(axial[:, 2] != 0)
    assert np.allclose(protocol_loads().b_field, [3 / np.sqrt(2), 0.0, 3 / np.sqrt(2)])


def test_truth_predicts_observations(pebax, protocol):
    loads, _, obs = protocol
    pred = predict_tips(pebax, PEBAX35, obs, loads)
    assert np.max(np.abs(pred - obs.positions())) < 1e-6


def test_zero_current_independent_of_actuator(pebax):
    obs = ObservationSet([Observation(ActuationInput.zeros(pebax, 140.0), np.zeros(3))])
    other = PEBAX35.with_values(("NA_x", "theta_x", "theta_y"), [2.0, 0.3, -1.0])
    assert np.array_equal(predict_tips(pebax, PEBAX35, obs), predict_tips(pebax, other, obs))


def test_regression_fixture(pebax):
    obs = ObservationSet([Observation(ActuationInput([[0.1, 0.0, 0.0]], 146.0), np.zeros(3))])
    p = predict_tips(pebax, PEBAX35, obs)[0]
    assert np.allclose(p, [8.245482171510728, -0.05359158851462166, 145.75075198121266], atol=1e-7)


def test_noiseless_recovery(pebax, protocol):
    loads, _, obs = protocol
    fit = estimate_parameters(pebax, obs, PERTURBED, BOUNDS, free=FREE, loads=loads)
    assert fit.converged
    assert fit.params.E == pytest.approx(31.03, rel=0.05)
    assert fit.params.G == pytest.approx(8.11, rel=0.05)
    assert fit.rmse < 1e-3
    h = fit.history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert set(fit.confidence) == set(FREE)


def test_deterministic(pebax, protocol):
    loads, _, obs = protocol
    a = estimate_parameters(pebax, obs, PERTURBED, BOUNDS, free=FREE, loads=loads, max_iter=3)
    b = estimate_parameters(pebax, obs, PERTURBED, BOUNDS, free=FREE, loads=loads, max_iter=3)
    assert a.params == b.params and a.history == b.history


def test_bounds_corner_stays_in_box(pebax, protocol):
    loads, _, obs = protocol
    box = {"E": (20.0, 25.0), "G": (9.0, 12.0), "theta_x": (2.0, 4.5), "theta_y": (-1.5, 1.5)}
    init = PEBAX35.with_values(("E", "G"), [25.0, 12.0])
    fit = estimate_parameters(pebax, obs, init, box, free=FREE, loads=loads, max_iter=15)
    for n in FREE:
        lo, hi = box[n]
        assert lo <= getattr(fit.params, n) <= hi
    assert fit.params.E == pytest.approx(25.0)   # truth lies outside: pinned at the face


def test_unit_reparameterisation(pebax, protocol):
    loads, inputs, _ = protocol
    noisy = synthesize_observations(pebax, PEBAX35, inputs, loads, noise=0.5, rng=np.random.default_rng(2))
    mpa = estimate_parameters(pebax, noisy, PERTURBED, BOUNDS, free=FREE, loads=loads)
    init_pa = PERTURBED.with_values(("E",), [PERTURBED.E * 1e6])
    bounds_pa = dict(BOUNDS, E=(1e6, 1e8))
    pa = estimate_parameters(pebax, noisy, init_pa, bounds_pa, free=FREE, loads=loads, units={"E": 1e-6})
    assert pa.params.E == pytest.approx(mpa.params.E, rel=1e-6)
    assert pa.params.G == pytest.approx(mpa.params.G, rel=1e-6)


def test_log_space_parameters(pebax, protocol):
    loads, _, obs = protocol
    init = PEBAX35.with_values(("M", "rho"), [PEBAX35.M * 3, PEBAX35.rho / 3])
    fit = estimate_parameters(pebax, obs, init, {}, free=("M", "rho"), loads=loads, max_iter=3)
    assert fit.params.M > 0 and fit.params.rho > 0


@pytest.mark.slow
def test_noise_band_over_seeds(pebax, protocol):
    loads, inputs, _ = protocol
    rms = []
    for seed in range(20):
        noisy = synthesize_observations(pebax, PEBAX35, inputs, loads, noise=0.5,
                                        rng=np.random.default_rng(seed))
        rms.append(estimate_parameters(pebax, noisy, PERTURBED, BOUNDS, free=FREE, loads=loads).rmse)
    assert 0.3 <= min(rms) and max(rms) <= 0.8


def test_failed_records(pebax, protocol, monkeypatch):
    loads, _, obs = protocol
    real = est.solve_bvp
    calls = {"n": 0}

    def flaky(spec, loads_, z, *a, **k):
        if z.currents[0, 2] == 0.3:
            raise est.BvpNotConverged(real(spec, loads_, z, *a, **k))
        return real(spec, loads_, z, *a, **k)

    monkeypatch.setattr(est, "solve_bvp", flaky)
    with pytest.warns(UserWarning):
        fit = estimate_parameters(pebax, obs, PERTURBED, BOUNDS, free=FREE, loads=loads, max_iter=4)
    assert fit.failed_records == 1

    def broken(*a, **k):
        raise est.NonFiniteStateError(0.0)

    monkeypatch.setattr(est, "solve_bvp", broken)
    with pytest.raises(AllRecordsFailed):
        estimate_parameters(pebax, obs, PERTURBED, BOUNDS, free=FREE, loads=loads)


def test_too_few_records(pebax):
    obs = ObservationSet([Observation(ActuationInput.zeros(pebax), np.zeros(3))])
    with pytest.raises(ValueError):
        estimate_parameters(pebax, obs, PEBAX35, free=est.PARAM_NAMES)


def test_observation_csv(tmp_path, pebax, protocol):
    _, _, obs = protocol
    path = tmp_path / "obs.csv"
    io.write_observations_csv(path, obs)
    back = io.read_observations_csv(path)
    assert back.count == obs.count
    assert np.array_equal(back.positions(), obs.positions())
    assert np.array_equal(back.records[3].z.as_vector(), obs.records[3].z.as_vector())
    (tmp_path / "bad.csv").write_text("record_id,i1,i2\n0,1,2\n")
    with pytest.raises(io.InputFormatError):
        io.read_observations_csv(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("record_id,i1,i2,i3,insert_mm,px,py,pz\n0,a,0,0,146,0,0,0\n")
    with pytest.raises(io.InputFormatError):
        io.read_observations_csv(tmp_path / "bad2.csv")
