import json
import subprocess
import sys as _sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pinched_sna import __version__
from pinched_sna.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_OK, cmd_certify, cmd_decay, cmd_sna, cmd_verify, main
from pinched_sna.config import ConfigError, ExperimentConfig, RunManifest, file_digest, parse_N_list
from pinched_sna.ftle import DecaySeries
from pinched_sna.attractor import boundary_line
from pinched_sna.torus import rotate

SMALL = dict(n_samples=2000, depth=200, N_list=(1, 2, 4, 8, 16), N_min=1)


def small(tmp_path, **kw):
    return ExperimentConfig(**{**SMALL, "out": str(tmp_path / "out"), **kw})


# configuration -------------------------------------------------------------

configs = st.builds(
    ExperimentConfig,
    kappa=st.floats(0.1, 1e4),
    D=st.just(1),
    rotation=st.one_of(st.just("golden"), st.tuples(st.floats(0.01, 0.99))),
    sampler=st.sampled_from(["grid", "midpoint", "pseudorandom"]),
    n_samples=st.integers(1, 10**7),
    seed=st.integers(0, 2**31),
    depth=st.integers(0, 5000),
    N_list=st.lists(st.integers(1, 10**4), min_size=1, unique=True).map(lambda xs: tuple(sorted(xs))),
    threshold=st.sampled_from([">=0", ">0"]),
    d=st.floats(1.0001, 5.0),
    kappa_sweep=st.lists(st.floats(0.1, 1e4), max_size=4).map(tuple),
    out=st.text("abcdefgh/_", min_size=1, max_size=12),
)


@given(configs)
def test_ini_round_trip_is_exact(cfg):
    back = ExperimentConfig.from_ini(cfg.to_ini())
    assert back == cfg and back.digest() == cfg.digest()


def test_ini_round_trip_with_constants(certified):
    _, c, _ = certified
    cfg = ExperimentConfig(kappa=1200.0, constants=c)
    back = ExperimentConfig.from_ini(cfg.to_ini())
    assert back.constants == c


def test_N_list_syntax():
    assert parse_N_list("10:50:10") == (10, 20, 30, 40, 50)
    assert parse_N_list("1, 5,9") == (1, 5, 9)
    with pytest.raises(ConfigError, match="decay.N_list"):
        parse_N_list("1:x:2")


@pytest.mark.parametrize(
    "text, field",
    [
        ("[system]\nkappa = -1\n", "system.kappa"),
        ("[system]\nkappa = abc\n", "system.kappa"),
        ("[system]\nD = 2\nrotation = 0.3\n", "system.rotation"),
        ("[sampling]\nsampler = sobol\n", "sampling.sampler"),
        ("[sampling]\nn = 0\n", "sampling.n"),
        ("[decay]\nN_list = 5, 3\n", "decay.N_list"),
        ("[decay]\nthreshold = >1\n", "decay.threshold"),
        ("[certify]\nd = 1\n", "certify.d"),
        ("[constants]\nalpha = 3\n", "constants"),
        ("[constants]\nzeta = 3\n", "constants.zeta"),
        ("[plotting]\nx = 1\n", "unknown section"),
    ],
)
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        ExperimentConfig.from_ini(text)


def test_rational_rotation_is_built_but_flagged():
    sys = ExperimentConfig(rotation=(0.5,)).system()
    assert not sys.v.totally_irrational_checked
    assert ExperimentConfig().system().v.totally_irrational_checked


def test_overrides_skip_missing_values_and_revalidate():
    cfg = ExperimentConfig()
    assert cfg.with_overrides(seed=None, kappa=None) is cfg
    assert cfg.with_overrides(seed=7).seed == 7
    with pytest.raises(ConfigError):
        cfg.with_overrides(kappa=0.0)


def test_manifest_round_trip(tmp_path):
    m = RunManifest("decay", "abc", __version__, config="[system]\n")
    with m.stage("work"):
        pass
    f = tmp_path / "x.txt"
    f.write_text("hello")
    m.record(f)
    path = m.write(tmp_path)
    back = RunManifest.from_json(path.read_text())
    assert back == m and back.outputs["x.txt"] == file_digest(f) and "work" in back.timings


# decay ---------------------------------------------------------------------

def test_decay_writes_series_plotdata_fit_and_manifest(tmp_path):
    cfg = small(tmp_path)
    assert cmd_decay(cfg) == EXIT_OK
    out = tmp_path / "out"
    series = DecaySeries.read_csv(out / "series.csv")
    assert [e.N for e in series.entries] == list(cfg.N_list)
    plot = (out / "plotdata.dat").read_text().splitlines()
    assert plot[0] == "# N log10(p)"
    for line, e in zip(plot[1:], [e for e in series.entries if e.p > 0]):
        N, y = line.split()
        assert int(N) == e.N and float(y) == pytest.approx(np.log10(e.p), rel=1e-15)
    assert "slope" in (out / "fit.txt").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_sha256"] == cfg.digest()
    for name in ("config.ini", "series.csv", "plotdata.dat", "fit.txt"):
        assert manifest["outputs"][name] == file_digest(out / name)
    assert ExperimentConfig.load(out / "config.ini") == cfg


def test_decay_is_byte_identical_across_runs_and_workers(tmp_path):
    outs = []
    for i, workers in enumerate((1, 1, 2)):
        cfg = small(tmp_path, out=str(tmp_path / f"o{i}"))
        assert cmd_decay(cfg, workers=workers) == EXIT_OK
        outs.append((tmp_path / f"o{i}" / "series.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_collapsed_attractor_exits_degenerate(tmp_path):
    cfg = small(tmp_path, kappa=1.5, depth=1000)
    assert cmd_decay(cfg) == EXIT_DEGENERATE
    text = (tmp_path / "out" / "diagnostic.txt").read_text()
    assert "kappa_0" in text and "collapsed" in text


def test_unresolvable_decay_exits_degenerate(tmp_path):
    cfg = small(tmp_path, n_samples=50, N_list=(100, 200, 300))
    assert cmd_decay(cfg) == EXIT_DEGENERATE
    assert "increase sampling.n" in (tmp_path / "out" / "diagnostic.txt").read_text()
    assert not (tmp_path / "out" / "fit.txt").exists()


# graph ---------------------------------------------------------------------

def read_graph(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_depth_zero_graph_is_the_top_line(tmp_path):
    assert cmd_sna(small(tmp_path, depth=0, n_samples=100)) == EXIT_OK
    assert np.all(read_graph(tmp_path / "out" / "graph.csv")[:, 1] == 1.0)


def test_graph_lies_in_unit_interval_and_vanishes_on_pinch_orbit(tmp_path):
    cfg = small(tmp_path, kappa=10.0, depth=300, sampler="grid", n_samples=4096)
    assert cmd_sna(cfg) == EXIT_OK
    g = read_graph(tmp_path / "out" / "graph.csv")
    assert np.all((g[:, 1] >= 0) & (g[:, 1] <= 1))
    # the graph vanishes on the forward orbit of the pinch, not at the pinch
    assert g[0, 0] == 0.0 and g[0, 1] > 0.0
    sys = cfg.system()
    for n in (1, 2, 3):
        assert boundary_line(sys, rotate(sys.theta_star, sys.v, n), 300) == 0.0
    assert g[1:, 1].max() > 0.1


# certify and verify --------------------------------------------------------

def test_certify_explicit_constants(tmp_path, certified):
    _, c, _ = certified
    cfg = ExperimentConfig(kappa=1200.0, constants=c, out=str(tmp_path / "ok"))
    assert cmd_certify(cfg) == EXIT_OK
    assert json.loads((tmp_path / "ok" / "constants.json").read_text())["m"] == c.m
    bad = ExperimentConfig(kappa=1200.0, constants=c.replace(m=5), out=str(tmp_path / "bad"))
    assert cmd_certify(bad) == EXIT_CHECK
    text = (tmp_path / "bad" / "certification.txt").read_text()
    assert "# verdict: FAIL" in text and "F5\tfail" in text
    assert not (tmp_path / "bad" / "constants.json").exists()


def test_certify_sweep_is_reproducible(tmp_path):
    texts = []
    for i in range(2):
        cfg = ExperimentConfig(kappa_sweep=(3.0, 1200.0), out=str(tmp_path / f"c{i}"))
        assert cmd_certify(cfg) == EXIT_OK
        texts.append((tmp_path / f"c{i}" / "certification.txt").read_text())
    assert texts[0] == texts[1]
    assert texts[0].startswith("# kappa 3: no constants, blocking condition F")
    assert "# verdict: PASS" in texts[0]


def test_certify_without_any_success_exits_check(tmp_path):
    assert cmd_certify(ExperimentConfig(kappa=3.0, out=str(tmp_path / "o"))) == EXIT_CHECK
    assert "no kappa on the sweep certified" in (tmp_path / "o" / "certification.txt").read_text()


def test_verify_needs_constants(tmp_path):
    with pytest.raises(ConfigError, match="no constants"):
        cmd_verify(ExperimentConfig(out=str(tmp_path / "none")))
    assert main(["verify", "--out", str(tmp_path / "none")]) == EXIT_CONFIG


def test_verify_after_certify_and_with_corrupted_constants(tmp_path, certified):
    _, c, _ = certified
    out = tmp_path / "run"
    cfg = ExperimentConfig(kappa=1200.0, constants=c, out=str(out), verify_samples=200, depth=200)
    assert cmd_certify(cfg) == EXIT_OK
    loaded = ExperimentConfig(kappa=1200.0, out=str(out), verify_samples=200, depth=200)
    assert cmd_verify(loaded) == EXIT_OK
    assert "# verdict: PASS" in (out / "verification.txt").read_text()
    data = json.loads((out / "constants.json").read_text())
    data["b"] *= 2
    (out / "constants.json").write_text(json.dumps(data))
    assert cmd_verify(loaded) == EXIT_CHECK
    assert "disjointness j=1\tfail" in (out / "verification.txt").read_text()


# entry point ---------------------------------------------------------------

def test_main_reports_config_errors(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[system]\nkappa = -2\n")
    assert main(["decay", "--config", str(ini)]) == EXIT_CONFIG
    assert "system.kappa" in capsys.readouterr().err
    assert main(["decay", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    assert main(["decay", "--workers", "0"]) == EXIT_CONFIG


def test_main_applies_overrides(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[sampling]\nn = 100\ndepth = 10\n[decay]\nN_list = 1, 2, 3\nN_min = 1\n")
    out = tmp_path / "o"
    code = main(["sna", "--config", str(ini), "--out", str(out), "--seed", "5", "--kappa", "4", "--samples", "37"])
    assert code == EXIT_OK
    cfg = ExperimentConfig.load(out / "config.ini")
    assert (cfg.seed, cfg.kappa, cfg.n_samples, cfg.depth) == (5, 4.0, 37, 10)
    assert len((out / "graph.csv").read_text().splitlines()) == 38


def test_module_entry_point_reports_version():
    res = subprocess.run([_sys.executable, "-m", "pinched_sna", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
