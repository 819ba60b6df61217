import json
import math

import numpy as np
import pytest
import yaml

from varsense import campaign
from varsense.cli import main
from varsense.fisher import optimal_measurement_angle
from varsense.optimize import EpochRecord
from varsense.traceio import TraceFormatError, read_trace, summarize


def write_cfg(tmp_path, name="cfg.yaml", **cfg):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


GD = {"mode": "gd", "seed": 7, "gd": {"epochs": 20},
      "perturbations": [{"epoch": 10, "delta_phi_hd": 0.5, "delta_phi_alpha": 0.5, "kind": "kick"}]}


def test_same_seed_gives_identical_files(tmp_path):
    cfg = write_cfg(tmp_path, **GD)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("trace.jsonl", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(["run", str(cfg), "--seed", "8", "--out-dir", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "trace.jsonl").read_bytes() != (tmp_path / "a" / "trace.jsonl").read_bytes()


def test_trace_and_manifest_contents(tmp_path):
    cfg = write_cfg(tmp_path, **GD)
    main(["run", str(cfg), "--out-dir", str(tmp_path)])
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert len(lines) == 20
    first = json.loads(lines[0])
    assert first["schema_version"] == "1.0"
    assert set(EpochRecord.__dataclass_fields__) <= set(first)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"]["campaign"] == 7
    assert manifest["config"]["bench"]["rng_seed"] == 7
    assert manifest["config"]["gd"]["epochs"] == 20


def test_report_round_trip(tmp_path, capsys):
    cfg = write_cfg(tmp_path, **GD)
    main(["run", str(cfg), "--out-dir", str(tmp_path)])
    capsys.readouterr()
    assert main(["report", str(tmp_path / "trace.jsonl"), "--json"]) == 0
    printed = json.loads(capsys.readouterr().out)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert printed == manifest["summary"]
    assert printed["below_snl"] is True
    assert printed["reconvergence"]["10"] is not None
    assert main(["report", str(tmp_path / "trace.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "below SNL: yes" in out and "kick at epoch 10" in out


@pytest.mark.parametrize("content", [
    "",
    "not json\n",
    '{"epoch": 1}\n',
    '{"epoch": 1, "optimizer": "gd", "phi_hd": 0, "phi_alpha": 0, "cost": 1, "schema_version": "2.0"}\n',
    '{"epoch": 2, "optimizer": "gd", "phi_hd": 0, "phi_alpha": 0, "cost": 1, "schema_version": "1.0"}\n'
    '{"epoch": 1, "optimizer": "gd", "phi_hd": 0, "phi_alpha": 0, "cost": 1, "schema_version": "1.0"}\n',
])
def test_bad_traces_are_rejected(tmp_path, content, capsys):
    path = tmp_path / "t.jsonl"
    path.write_text(content)
    assert main(["report", str(path)]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(TraceFormatError):
        read_trace(path)


def test_minor_schema_versions_are_accepted(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"epoch": 1, "optimizer": "gd", "phi_hd": 0.1, "phi_alpha": 1.6, "cost": 0.004, '
                    '"schema_version": "1.3", "new_field": 1}\n')
    assert read_trace(path).records[0].cost == 0.004
    with pytest.raises(TraceFormatError):
        summarize(read_trace(path).__class__(), 30.0)


def test_landscape_minimum_at_optimal_angle(tmp_path):
    cfg = write_cfg(tmp_path, mode="landscape", seed=1, bench={"alpha": 0.0}, gd={"epochs": 3})
    assert main(["landscape", str(cfg), "--out-dir", str(tmp_path)]) == 0
    data = np.genfromtxt(tmp_path / "landscape.csv", delimiter=",", names=True)
    assert data.shape == (200 * 200,)
    best = data[np.argmin(data["true_cost"])]
    cell = 2 * math.pi / 199
    phi_opt = optimal_measurement_angle(1.52, 0.72)
    gaps = [abs(math.remainder(best["phi_hd"] - s * phi_opt, math.pi)) for s in (1, -1)]
    assert min(gaps) <= cell
    overlay = (tmp_path / "overlay.csv").read_text().splitlines()
    assert overlay[0].startswith("epoch,") and len(overlay) == 4


def test_gd_then_bo_warm_start_size(tmp_path):
    cfg = write_cfg(tmp_path, mode="gd-then-bo", seed=3, gd={"epochs": 10},
                    bo={"epochs": 2, "grid_size": 40, "n_starts": 2})
    assert main(["run", str(cfg), "--out-dir", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    warm = manifest["bo"]["warm_start"]
    assert warm["size"] == 136 and warm["sources"] == {"gd": 10, "random": 126}
    trace = read_trace(tmp_path / "trace.jsonl")
    assert [r.optimizer for r in trace.records] == ["gd"] * 10 + ["bo"] * 2
    assert [r.epoch for r in trace.records] == list(range(1, 13))


def test_several_seeds_in_parallel(tmp_path):
    cfg = write_cfg(tmp_path, **dict(GD, gd={"epochs": 3}))
    args = ["run", str(cfg), "--seed", "1", "--seed", "2", "--out-dir", str(tmp_path / "runs")]
    assert main(args + ["--parallel", "2"]) == 0
    serial = tmp_path / "serial"
    assert main(["run", str(cfg), "--seed", "1", "--seed", "2", "--out-dir", str(serial)]) == 0
    for s in (1, 2):
        assert ((tmp_path / "runs" / f"seed-{s}" / "trace.jsonl").read_bytes()
                == (serial / f"seed-{s}" / "trace.jsonl").read_bytes())


@pytest.mark.parametrize("cfg", [
    {"mode": "gd"},
    {"mode": "sideways", "seed": 1},
    {"mode": "gd", "seed": 1, "gd": {"epochs": 0}},
    {"mode": "gd", "seed": 1, "bench": {"eta": 2.0}},
    {"mode": "gd", "seed": 1, "bench": {"rng_seed": 3}},
    {"mode": "gd", "seed": 1, "colour": "blue"},
    {"mode": "bo", "seed": 1, "bo": {"preset": "wobbly"}},
])
def test_config_errors_exit_nonzero(tmp_path, cfg, capsys):
    path = write_cfg(tmp_path, **cfg)
    assert main(["run", str(path), "--out-dir", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2


def test_failures_flush_partial_trace(tmp_path, monkeypatch):
    real = campaign.run_gradient_descent

    def boom(bench, cfg, schedule=(), trace=None):
        real(bench, cfg.__class__(epochs=2), schedule, trace=trace)
        raise RuntimeError("bench went away")

    monkeypatch.setattr(campaign, "run_gradient_descent", boom)
    path = write_cfg(tmp_path, **GD)
    assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 1
    assert len((tmp_path / "trace.jsonl").read_text().splitlines()) == 2
    assert "bench went away" in json.loads((tmp_path / "manifest.json").read_text())["error"]
