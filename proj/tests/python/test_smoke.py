"""Smoke tests for the python bindings and the CLI.

The C++ suites carry the real coverage; these check that the main operations
are usable from python and that the shipped tools behave end to end.
"""

import os
import subprocess

import numpy as np
import pytest

import sdsim


@pytest.fixture(scope="module")
def dataset():
    tree = sdsim.build_hierarchy(sdsim.TreeSpec(branching=2, depth=4))
    return sdsim.make_dataset(tree)


def test_dataset_shapes(dataset):
    assert dataset.items == 8
    assert dataset.features == 15
    assert dataset.Y.shape == (15, 8)
    assert np.array_equal(dataset.X, np.eye(8))
    assert dataset.Y.sum(axis=0).tolist() == [4.0] * 8


def test_frequency_rules(dataset):
    doubled = sdsim.apply_frequency(dataset, "odd_items_double")
    assert doubled.freq.tolist() == [2, 1, 2, 1, 2, 1, 2, 1]
    explicit = sdsim.apply_frequency(dataset, np.full(8, 3.0))
    assert explicit.freq.tolist() == [3.0] * 8
    with pytest.raises(sdsim.ConfigError):
        sdsim.apply_frequency(dataset, np.zeros(8))


def test_train_and_oracle(dataset):
    cfg = sdsim.NetworkConfig()
    cfg.hidden = 8
    cfg.seed = 7
    net = sdsim.init_network(cfg, dataset.items, dataset.features)
    net, report = sdsim.train_to_convergence(net, dataset)
    assert report.converged
    assert report.final_loss <= 1e-8
    gap = sdsim.oracle_gap(net, dataset, net.alive_count)
    assert gap <= 1e-3
    np.testing.assert_allclose(
        sdsim.composite_map(net), dataset.Y, atol=1e-3)


def test_schedule_and_analysis(dataset):
    cfg = sdsim.NetworkConfig()
    cfg.seed = 11
    net = sdsim.init_network(cfg, dataset.items, dataset.features)
    net, report = sdsim.train_to_convergence(net, dataset)
    assert report.converged

    sched = sdsim.AtrophySchedule()
    sched.deletion_seed = 5
    sched.relearn_epochs = 50
    traj = sdsim.run_schedule(dataset, net, sched, cfg.learning_rate)

    assert traj.hidden_start == 16
    assert len(traj.steps) == 16
    last = traj.steps[-1]
    assert last.alive == 0
    assert np.all(last.yhat == 0.0)
    assert [e.percent for e in last.level_errors] == [100.0] * 4
    assert len(last.responses) == 8

    onset = sdsim.first_onset(traj, sdsim.ResponseClass.category_coordinate)
    assert onset is None or 1 <= onset <= 16


def test_classification(dataset):
    truth = dataset.Y[:, 3].copy()
    assert sdsim.decode_item(truth, dataset) == 3
    r = sdsim.classify_response(truth, 3, dataset)
    assert r.cls == sdsim.ResponseClass.correct
    sibling = sdsim.classify_response(dataset.Y[:, 2].copy(), 3, dataset)
    assert sibling.cls == sdsim.ResponseClass.category_coordinate
    assert sibling.decoded_item == 2


def test_spectrum(dataset):
    spec = sdsim.mode_spectrum(dataset)
    assert spec.singular_values.shape == (8,)
    assert spec.level_assignment[0] == 1
    assert abs(spec.singular_values[0] - np.sqrt(15.0)) < 1e-9


def test_config_roundtrip():
    cfg = sdsim.parse_config("")
    text = sdsim.render_config(cfg)
    assert sdsim.render_config(sdsim.parse_config(text)) == text


def test_run_experiment(tmp_path):
    cfg = sdsim.parse_config(
        "[tree]\ndepth = 3\n\n[network]\nhidden = 4\n\n"
        "[experiment]\nseeds = 1 2\n\n"
        "[schedule base]\nrelearn_epochs = 0\n\n"
        "[schedule relearn]\nrelearn_epochs = 25\n"
    )
    manifest = sdsim.run_experiment(cfg, workers=2, out_dir=str(tmp_path))
    assert manifest.all_completed
    assert len(manifest.runs) == 4
    for name in ("manifest.json", "table1.csv", "figure1.csv", "dataset.txt"):
        assert (tmp_path / name).exists()


@pytest.mark.skipif("SDSIM_CLI" not in os.environ, reason="CLI path not set")
def test_cli_end_to_end(tmp_path):
    cli = os.environ["SDSIM_CLI"]
    config = tmp_path / "exp.cfg"
    config.write_text(
        "[tree]\ndepth = 3\n\n[network]\nhidden = 4\n\n"
        "[experiment]\nseeds = 1 2\n\n"
        "[schedule base]\nrelearn_epochs = 0\n\n"
        "[schedule relearn]\nrelearn_epochs = 25\n"
    )
    out = tmp_path / "out"

    def run(*args):
        return subprocess.run([cli, *args], capture_output=True, text=True)

    assert run("run", "--config", str(config), "--out", str(out)).returncode == 0
    assert run("analyze", "--out", str(out)).returncode == 0
    assert run("plotdata", "--out", str(out), "--kind", "level_curves").returncode == 0
    assert run("selfcheck", "--out", str(out)).returncode == 0
    assert (out / "plot_level_curves.csv").exists()

    bad = run("run", "--config", str(tmp_path / "missing.cfg"))
    assert bad.returncode == 2  # unreadable file is a runtime fault
    config.write_text("[tree]\nbranching = 1\n")
    assert run("run", "--config", str(config)).returncode == 1
