import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finctl.cli import main
from finctl.controller import ControllerGains
from finctl.guidance import TrajectoryParams
from finctl.harness import io
from finctl.harness.bench import bench_method
from finctl.harness.episode import EpisodeConfig, EpisodeRecord, run_episode
from finctl.harness.io import (CSV_COLUMNS, ConfigFileError, config_from_dict, load_config,
                               read_episode_csv, write_episode_csv)
from finctl.harness.metrics import compute_metrics
from finctl.harness.montecarlo import (ParameterRanges, run_montecarlo, sample_trajectory,
                                       sampling_rng, summarize)
from finctl.harness.tuning import (GaParams, ga_minimize, gains_to_genome, genome_to_gains,
                                   tracking_cost)
from finctl.math_core import IDENTITY_QUAT


def synthetic_record(n=5, lin_err=(0.0, 0.0, 0.0), alloc_ms=None):
    eta_d = np.tile(np.r_[1.0, 2.0, 3.0, IDENTITY_QUAT], (n, 1))
    eta_hat = eta_d.copy()
    eta_hat[:, :3] -= np.asarray(lin_err)
    rec = EpisodeRecord.empty(n, "prop")
    rec.t = np.arange(n) / 20.0
    rec.eta_d, rec.eta, rec.eta_hat = eta_d, eta_d.copy(), eta_hat
    rec.nu = np.zeros((n, 6))
    rec.tau_des = np.zeros((n, 6))
    rec.tau_sim = np.zeros((n, 6))
    rec.amp = np.zeros((n, 4))
    rec.phi0 = np.zeros((n, 4))
    rec.angle = np.zeros((n, 4))
    if alloc_ms is not None:
        rec.alloc_ms = np.asarray(alloc_ms, dtype=float)
    return rec


# metrics -------------------------------------------------------------------

def test_zero_error_metrics_vanish():
    m = compute_metrics(synthetic_record())
    for name in ("RMSE_lin", "RMSE_ang", "MEM_lin", "MEM_ang", "MAW", "MW", "MAE_lin", "MAE_ang",
                 "fin_rotation"):
        assert getattr(m, name) == 0.0
    assert math.isnan(m.MCT)


def test_constant_offset_metrics():
    m = compute_metrics(synthetic_record(lin_err=(3.0, 4.0, 0.0)))
    assert m.MEM_lin == pytest.approx(5.0)
    assert m.RMSE_lin == pytest.approx(5.0)


def test_mct_is_median_of_timed_calls():
    assert compute_metrics(synthetic_record(3, alloc_ms=[1.0, 2.0, 9.0])).MCT == 2.0


def test_empty_record_rejected():
    with pytest.raises(ValueError):
        compute_metrics(EpisodeRecord.empty(0, "prop"))


def test_fin_rotation_sums_absolute_increments():
    rec = synthetic_record(3)
    rec.angle = np.array([[0.0, 0, 0, 0], [0.5, -0.5, 0, 0], [0.0, 0, 0, 1.0]])
    assert rec.fin_rotation == pytest.approx(0.5 + 0.5 + 0.5 + 0.5 + 1.0)


# episodes and CSV ----------------------------------------------------------

@pytest.fixture(scope="module")
def short_record():
    return run_episode(EpisodeConfig(duration=3.0, seed=4))


def test_record_has_one_row_per_tick_plus_start(short_record):
    assert len(short_record) == 3 * 20 + 1
    assert short_record.t[0] == 0.0 and short_record.t[-1] == pytest.approx(3.0)


def test_csv_is_byte_identical_for_same_seed(tmp_path, short_record):
    again = run_episode(EpisodeConfig(duration=3.0, seed=4))
    a = write_episode_csv(short_record, tmp_path / "a.csv").read_bytes()
    b = write_episode_csv(again, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_different_seed_changes_noise(short_record):
    other = run_episode(EpisodeConfig(duration=3.0, seed=5))
    assert not np.array_equal(other.eta_hat, short_record.eta_hat)


def test_csv_roundtrip(tmp_path, short_record):
    path = write_episode_csv(short_record, tmp_path / "r.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS
    assert len(lines) == len(short_record) + 1
    back = read_episode_csv(path, "prop")
    for name in ("t", "eta_d", "eta", "eta_hat", "nu", "tau_des", "tau_sim", "amp", "phi0", "angle"):
        assert np.allclose(getattr(back, name), getattr(short_record, name), rtol=1e-11, atol=1e-12)
    assert np.array_equal(back.h, short_record.h)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_episode_csv(path)


def test_setpoint_at_start_stays_put():
    from finctl.math_core import Pose
    sp = Pose(np.zeros(3), IDENTITY_QUAT)
    cfg = EpisodeConfig(setpoint=sp, duration=2.0, perfect_sensing=True)
    rec = run_episode(cfg)
    assert compute_metrics(rec).RMSE_lin < 1e-9


# configuration -------------------------------------------------------------

def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigFileError):
        config_from_dict({"method": "prop", "colour": "red"})
    with pytest.raises(ConfigFileError):
        config_from_dict({"gains": {"K_x": 1.0}})


def test_config_file_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("method: opt\nduration: 12\ngains:\n  K_p: [1, 2, 3, 4]\n"
                    "trajectory:\n  shape: lissajous\nfins:\n  compliance: 1.2\n")
    cfg = load_config(path)
    assert cfg.method == "opt" and cfg.duration == 12.0
    assert np.array_equal(cfg.gains.K_p, [1, 2, 3]) and cfg.gains.k == 4
    assert cfg.trajectory.shape == "lissajous" and cfg.coeffs.compliance == 1.2


def test_config_file_must_be_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigFileError):
        load_config(path)


# campaigns -----------------------------------------------------------------

def test_empty_campaign_is_valid_json(tmp_path):
    res = run_montecarlo(0)
    text = io.write_json(res.summary(), tmp_path / "c.json").read_text()
    block = json.loads(text)["methods"]["prop"]
    assert block["runs"] == 0 and block["metrics"]["RMSE_lin"] == {"median": None, "iqr": None}


def test_single_value_has_zero_iqr():
    assert summarize([0.3]) == {"median": 0.3, "iqr": 0.0}


def test_summary_ignores_non_finite():
    assert summarize([1.0, float("nan"), None, 3.0])["median"] == 2.0


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=30), st.randoms())
def test_summary_is_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = summarize(values), summarize(shuffled)
    assert a["median"] == pytest.approx(b["median"]) and a["iqr"] == pytest.approx(b["iqr"])


def test_trajectory_sampling_in_ranges_and_reproducible():
    r = ParameterRanges()
    for i in range(50):
        tr = sample_trajectory(sampling_rng(3, i))
        assert tr == sample_trajectory(sampling_rng(3, i))
        for name in ("A_x", "A_y", "A_z", "omega_x", "omega_y", "omega_z", "c_phi"):
            lo, hi = getattr(r, name)
            assert lo <= getattr(tr, name) <= hi
        if tr.shape == "lissajous":
            assert r.l_x[0] <= tr.l_x <= r.l_x[1]


def test_campaign_shares_trajectories_across_methods():
    res = run_montecarlo(1, ("inv", "prop"), seed=2, duration=1.0)
    a, b = res.for_method("inv")[0], res.for_method("prop")[0]
    assert a.trajectory == b.trajectory
    assert not a.failed and not b.failed


def test_campaign_rejects_bad_arguments():
    with pytest.raises(ValueError):
        run_montecarlo(-1)
    with pytest.raises(ValueError):
        run_montecarlo(1, ("pinv",))


def test_inv_effort_on_six_thruster_ellipse():
    traj = TrajectoryParams(scenario="6T", shape="ellipse")
    rec = run_episode(EpisodeConfig(trajectory=traj, method="inv", duration=30.0))
    assert not rec.failed
    assert compute_metrics(rec).MW > 12.5


# allocation bench ----------------------------------------------------------

def test_zero_profile_bench_has_no_error():
    res = bench_method("prop", profile=lambda t: np.zeros(6), duration=2.0)
    assert res.mae_lin == 0.0 and res.mae_ang == 0.0


# tuning --------------------------------------------------------------------

def test_genome_gain_roundtrip():
    g = np.arange(1.0, 11.0)
    assert np.array_equal(gains_to_genome(genome_to_gains(g)), g)
    assert isinstance(genome_to_gains(g, "inv"), ControllerGains)


def test_tracking_cost_zero_on_perfect_record():
    assert tracking_cost([synthetic_record()]) == 0.0
    assert tracking_cost([synthetic_record()], Q=np.ones(6), R=np.zeros(6)) == 0.0


def test_tracking_cost_oracle():
    rec = synthetic_record(4, lin_err=(3.0, 4.0, 0.0))
    assert tracking_cost([rec], Q=np.ones(6), R=np.zeros(6)) == pytest.approx(5.0)
    rec.failed = True
    assert tracking_cost([rec]) == float("inf")


def test_ga_history_is_monotone_and_finds_quadratic_minimum():
    target = np.full(4, 7.0)
    res = ga_minimize(lambda g: float(np.sum((g - target) ** 2)), 4,
                      GaParams(population=30, iterations=40), seed=1)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))
    assert len(res.history) == 41
    assert res.best_cost < res.history[0]


def test_ga_identical_population_and_seed_repeatable():
    p = GaParams(population=6, iterations=5, mutation_prob=0.0)
    init = np.full((6, 3), 2.0)
    res = ga_minimize(lambda g: float(np.sum(g)), 3, p, seed=0, initial=init)
    assert np.allclose(res.best_genome, 2.0) and res.history == [6.0] * 6
    a = ga_minimize(lambda g: float(np.sum(g)), 3, GaParams(population=8, iterations=4), seed=9)
    b = ga_minimize(lambda g: float(np.sum(g)), 3, GaParams(population=8, iterations=4), seed=9)
    assert np.array_equal(a.best_genome, b.best_genome)


def test_ga_params_validation():
    with pytest.raises(ValueError):
        GaParams(population=1)
    with pytest.raises(ValueError):
        GaParams(mutation_prob=1.5)
    with pytest.raises(ValueError):
        GaParams(crossover="three_point")


# command line --------------------------------------------------------------

def test_cli_simulate_and_report(tmp_path):
    assert main(["simulate", "--duration", "1", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "metrics.json").read_text())
    assert summary["samples"] == 21
    assert main(["montecarlo", "--runs", "1", "--methods", "prop", "--duration", "1",
                 "--out", str(tmp_path / "mc")]) == 0
    assert (tmp_path / "mc" / "prop_run0000.csv").exists()
    assert main(["report", "--in", str(tmp_path / "mc")]) == 0
    report = json.loads((tmp_path / "mc" / "report.json").read_text())
    assert report["methods"]["prop"]["runs"] == 1


def test_cli_bench_and_tune(tmp_path):
    assert main(["alloc-bench", "--methods", "inv", "--duration", "1", "--out", str(tmp_path)]) == 0
    assert "inv" in json.loads((tmp_path / "alloc_bench.json").read_text())
    assert main(["tune", "--population", "2", "--iterations", "0", "--duration", "0.5",
                 "--out", str(tmp_path)]) == 0
    assert len(json.loads((tmp_path / "tuned_gains.json").read_text())["K_p"]) == 4


def test_cli_bad_paths_exit_nonzero(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 1
    assert main(["report", "--in", str(tmp_path / "nothing")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("bogus: 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1
