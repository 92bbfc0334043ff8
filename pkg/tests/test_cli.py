import json

import numpy as np
import pytest

from cauchyconv import io
from cauchyconv.cli import main

KERNEL = {"family": "PowerCompact", "params": {"r": 0.25, "eta": 1.0}}


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def dataset(tmp_path):
    cfg = write_config(tmp_path / "sim.json", {"process": "cauchy", "kernel": KERNEL, "lattice": 3, "n": 400})
    assert run("simulate", "--config", cfg, "--seed", 1, "--output", tmp_path / "data") == 0
    return tmp_path / "data"


def files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_simulate_is_deterministic(tmp_path, dataset):
    cfg = tmp_path / "sim.json"
    assert run("simulate", "--config", cfg, "--seed", 1, "--output", tmp_path / "again") == 0
    assert files(dataset) == files(tmp_path / "again")
    labels, values = io.read_matrix(dataset / "replicates.csv")
    assert values.shape == (400, 9) and labels[0] == "s1"


def test_simulate_ev_writes_frechet_scale(tmp_path):
    cfg = write_config(tmp_path / "ev.json", {"process": "ev", "kernel": KERNEL, "lattice": 2, "n": 50})
    assert run("simulate", "--config", cfg, "--seed", 3, "--output", tmp_path / "ev") == 0
    side = json.loads((tmp_path / "ev" / "replicates.json").read_text())
    assert side["scale"] == "frechet"
    _, values = io.read_matrix(tmp_path / "ev" / "replicates.csv")
    assert np.all(values > 0)


@pytest.mark.parametrize("cfg", [
    {"process": "cauchy", "kernel": {"family": "PowerCompact", "params": {"r": 0.25}}, "lattice": 3, "n": 10},
    {"process": "cauchy", "lattice": 3, "n": 10},
    {"process": "magic", "kernel": KERNEL, "lattice": 3, "n": 10},
    {"process": "cauchy", "kernel": KERNEL, "n": 10},
    {"process": "cauchy", "kernel": KERNEL, "lattice": 3, "n": 0},
])
def test_simulate_config_errors_exit_2(tmp_path, cfg, capsys):
    path = write_config(tmp_path / "bad.json", cfg)
    assert run("simulate", "--config", path, "--seed", 1, "--output", tmp_path / "out") == 2
    assert "configuration error" in capsys.readouterr().err


def test_unreadable_config_and_bad_flags(tmp_path):
    (tmp_path / "broken.json").write_text("{not json")
    assert run("simulate", "--config", tmp_path / "broken.json", "--output", tmp_path / "o") == 2
    assert run("simulate", "--config", tmp_path / "missing.json", "--output", tmp_path / "o") == 2
    assert run("frobnicate") == 2


def test_fit_round_trip_and_pairs_table(tmp_path, dataset):
    out = tmp_path / "fit"
    assert run("fit", "--data", dataset / "replicates.csv", "--sites", dataset / "sites.csv",
               "--seed", 0, "--output", out) == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["family"] == "PowerCompact"
    assert fit["theta_K"]["r"] == pytest.approx(0.25, abs=0.1)
    header = (out / "pairs.csv").read_text().splitlines()[0]
    assert header.startswith("j,k,label_j,label_k,delta,c_hat")
    assert len((out / "pairs.csv").read_text().splitlines()) == 37


def test_fit_is_deterministic(tmp_path, dataset):
    for name in ("a", "b"):
        assert run("fit", "--data", dataset / "replicates.csv", "--sites", dataset / "sites.csv",
                   "--seed", 0, "--output", tmp_path / name) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_fit_dataset_errors(tmp_path, dataset):
    sites = (dataset / "sites.csv").read_text().splitlines()
    dup = tmp_path / "dup.csv"
    dup.write_text("\n".join(sites[:2] + [sites[1]] + sites[3:]) + "\n")
    assert run("fit", "--data", dataset / "replicates.csv", "--sites", dup, "--output", tmp_path / "o") == 2
    renamed = tmp_path / "renamed.csv"
    renamed.write_text("\n".join(sites[:1] + [sites[1].replace("s1", "zz")] + sites[2:]) + "\n")
    assert run("fit", "--data", dataset / "replicates.csv", "--sites", renamed, "--output", tmp_path / "o") == 2
    labels, values = io.read_matrix(dataset / "replicates.csv")
    io.write_matrix(tmp_path / "two.csv", labels[:2], values[:, :2])
    (tmp_path / "two_sites.csv").write_text("\n".join(sites[:3]) + "\n")
    assert run("fit", "--data", tmp_path / "two.csv", "--sites", tmp_path / "two_sites.csv",
               "--output", tmp_path / "o") == 2


def test_missing_cells_rejected(tmp_path, dataset):
    lines = (dataset / "replicates.csv").read_text().splitlines()
    cells = lines[5].split(",")
    cells[2] = ""
    lines[5] = ",".join(cells)
    bad = tmp_path / "holes.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert run("fit", "--data", bad, "--sites", dataset / "sites.csv", "--output", tmp_path / "o") == 2


def test_csv_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_cauchy((20, 3)) * 10.0 ** rng.integers(-300, 300, (20, 3))
    io.write_matrix(tmp_path / "m.csv", ["a", "b", "c"], values)
    labels, back = io.read_matrix(tmp_path / "m.csv")
    assert labels == ["a", "b", "c"]
    assert np.array_equal(back, values)


def test_study_requires_seed_and_is_deterministic(tmp_path):
    cfg = write_config(tmp_path / "study.json", {"process": "cauchy", "d": 9, "n": 150, "N": 2})
    assert run("study", "--config", cfg, "--output", tmp_path / "s0") == 2
    for name in ("s1", "s2"):
        assert run("study", "--config", cfg, "--seed", 5, "--jobs", 1, "--output", tmp_path / name) == 0
    assert files(tmp_path / "s1") == files(tmp_path / "s2")
    report = json.loads((tmp_path / "s1" / "report.json").read_text())
    assert len(report["cells"]) == 1 and report["cells"][0]["config"]["N"] == 2


def test_study_cells(tmp_path):
    cfg = write_config(tmp_path / "study.json", {"n": 100, "N": 1, "d": 9,
                                                  "cells": [{"process": "cauchy"}, {"process": "cauchy", "d": 4}]})
    assert run("study", "--config", cfg, "--seed", 2, "--jobs", 1, "--output", tmp_path / "s") == 0
    rows = (tmp_path / "s" / "table.csv").read_text().splitlines()
    assert len(rows) == 3


def test_diagnose(tmp_path, dataset):
    assert run("fit", "--data", dataset / "replicates.csv", "--sites", dataset / "sites.csv",
               "--output", tmp_path / "fit") == 0
    cfg = write_config(tmp_path / "diag.json", {"n_mc": 2000, "n_deltas": 4, "grid_m": 100})
    args = ["diagnose", "--data", dataset / "replicates.csv", "--sites", dataset / "sites.csv",
            "--fit", tmp_path / "fit" / "fit.json", "--config", cfg, "--seed", 9]
    assert run(*args, "--output", tmp_path / "d1") == 0
    assert run(*args, "--output", tmp_path / "d2") == 0
    assert files(tmp_path / "d1") == files(tmp_path / "d2")
    lines = (tmp_path / "d1" / "curves.csv").read_text().splitlines()
    assert lines[0] == "delta,statistic,value,source"
    assert "0,spearman,1,model" in lines and "0,taildep,1,model" in lines
    empty = write_config(tmp_path / "empty.json", {"delta_max": 0.1})
    assert run("diagnose", "--data", dataset / "replicates.csv", "--sites", dataset / "sites.csv",
               "--fit", tmp_path / "fit" / "fit.json", "--config", empty, "--output", tmp_path / "d3") == 2
