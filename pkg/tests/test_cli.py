import json

import numpy as np
import pytest

from bandana.cli import main
from bandana.graph import load_dataset


@pytest.fixture(scope="module")
def moon_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "moon"
    assert main(["dataset", "gen", "two-moon", "--n", "160", "--k", "4",
                 "--noise", "0.08", "--seed", "3", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory, moon_dir):
    """A tiny pretraining run shared by the probe/report tests."""
    out = tmp_path_factory.mktemp("runs") / "tiny"
    code = main(["pretrain", "--dataset", str(moon_dir), "--out", str(out),
                 "--layers", "2", "--hidden", "24", "--out-dim", "24",
                 "--max-epochs", "6", "--tau", "0.9", "--layerwise", "lwp",
                 "--seed", "0"])
    assert code == 0
    return out


def test_dataset_gen_and_stats(moon_dir, capsys):
    g = load_dataset(moon_dir / "manifest.json")
    assert g.num_nodes == 160
    assert main(["dataset", "stats", str(moon_dir)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["nodes"] == 160
    assert stats["edges_directed"] == g.num_directed_entries
    assert 0 < stats["density_permille"] < 1000


def test_dataset_gen_karate(tmp_path, capsys):
    out = tmp_path / "karate"
    assert main(["dataset", "gen", "karate", "--out", str(out)]) == 0
    g = load_dataset(out / "manifest.json")
    assert g.num_nodes == 34 and g.num_directed_entries == 156


def test_dataset_validate(moon_dir, capsys):
    assert main(["dataset", "validate", str(moon_dir)]) == 0
    assert "OK" in capsys.readouterr().out


def test_pretrain_writes_artifacts(tiny_run):
    for name in ("checkpoint.json", "history.csv", "config.json", "split.json",
                 "history.png"):
        assert (tiny_run / name).exists(), name
    history = (tiny_run / "history.csv").read_text().strip().splitlines()
    assert history[0] == "epoch,loss,val_metric"
    assert len(history) == 7  # header + 6 epochs
    cfg = json.loads((tiny_run / "config.json").read_text())
    assert cfg["config"]["num_layers"] == 2
    assert "config_hash" in cfg and "version" in cfg


def test_pretrain_rejects_tau_with_bernoulli(moon_dir, tmp_path):
    with pytest.raises(SystemExit):
        main(["pretrain", "--dataset", str(moon_dir), "--mask", "bernoulli",
              "--tau", "0.5", "--out", str(tmp_path / "x")])


def test_probe_link_smoke(tiny_run, moon_dir, tmp_path, capsys):
    out = tmp_path / "link.json"
    assert main(["probe", "link", "--dataset", str(moon_dir),
                 "--checkpoint", str(tiny_run), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert "auc" in payload["metrics"] and "ap" in payload["metrics"]
    assert 0.0 <= payload["metrics"]["auc"]["mean"] <= 1.0


def test_probe_link_ignores_deleted_decoder(tiny_run, moon_dir, tmp_path):
    pruned = tmp_path / "pruned"
    pruned.mkdir()
    ckpt = json.loads((tiny_run / "checkpoint.json").read_text())
    ckpt["params"]["tensors"] = {k: v for k, v in ckpt["params"]["tensors"].items()
                                 if not k.startswith("decoder.")}
    (pruned / "checkpoint.json").write_text(json.dumps(ckpt))
    (pruned / "split.json").write_text((tiny_run / "split.json").read_text())

    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    main(["probe", "link", "--dataset", str(moon_dir),
          "--checkpoint", str(tiny_run), "--out", str(out_a)])
    main(["probe", "link", "--dataset", str(moon_dir),
          "--checkpoint", str(pruned), "--out", str(out_b)])
    a = json.loads(out_a.read_text())["metrics"]
    b = json.loads(out_b.read_text())["metrics"]
    assert a["auc"]["mean"] == b["auc"]["mean"]
    assert a["ap"]["mean"] == b["ap"]["mean"]


def test_probe_node_smoke(tiny_run, moon_dir, tmp_path):
    out = tmp_path / "node.json"
    assert main(["probe", "node", "--dataset", str(moon_dir),
                 "--checkpoint", str(tiny_run), "--repeats", "2",
                 "--label-ratio", "0.5", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["num_runs"] == 2
    assert "micro_f1" in payload["metrics"]


def test_probe_reproducible(tiny_run, moon_dir, tmp_path):
    out_a, out_b = tmp_path / "ra.json", tmp_path / "rb.json"
    for out in (out_a, out_b):
        main(["probe", "node", "--dataset", str(moon_dir),
              "--checkpoint", str(tiny_run), "--repeats", "2", "--out", str(out)])
    a = json.loads(out_a.read_text())
    b = json.loads(out_b.read_text())
    assert a["metrics"] == b["metrics"]


def test_diagnose_energy(tmp_path, capsys):
    out = tmp_path / "diag"
    assert main(["diagnose", "energy", "--trials", "500", "--out", str(out)]) == 0
    payload = json.loads((out / "energy.json").read_text())
    assert payload["violations"] == 0


def test_diagnose_mask_ratio(moon_dir, tmp_path, capsys):
    out = tmp_path / "diag"
    assert main(["diagnose", "mask-ratio", "--dataset", str(moon_dir),
                 "--resamples", "5", "--out", str(out)]) == 0
    payload = json.loads((out / "mask_ratio.json").read_text())
    assert payload["measured"] >= payload["calculated"] - 1e-12
    assert (out / "mask_ratio.png").exists()


def test_diagnose_entropy(moon_dir, tmp_path):
    out = tmp_path / "diag"
    assert main(["diagnose", "entropy", "--dataset", str(moon_dir),
                 "--tau", "0.4", "--out", str(out)]) == 0
    assert (out / "entropy.csv").exists()
    assert (out / "entropy.png").exists()


def test_diagnose_components(moon_dir, tmp_path):
    out = tmp_path / "diag"
    assert main(["diagnose", "components", "--dataset", str(moon_dir),
                 "--mask", "bernoulli", "--p", "0.7", "--resamples", "3",
                 "--out", str(out)]) == 0
    payload = json.loads((out / "components.json").read_text())
    unmasked = payload["rows"][0]["components"]
    assert all(r["components"] >= unmasked for r in payload["rows"][1:])
    assert (out / "components.png").exists()


def test_ablate_smoke(moon_dir, tmp_path, capsys):
    out = tmp_path / "abl"
    assert main(["ablate", "--dataset", str(moon_dir), "--repeats", "1",
                 "--layers", "2", "--hidden", "16", "--out-dim", "16",
                 "--max-epochs", "3", "--p", "0.7", "--out", str(out)]) == 0
    rows = (out / "ablation.csv").read_text().strip().splitlines()
    assert len(rows) == 7  # header + 6 strategies
    assert (out / "ablation.png").exists()
    payload = json.loads((out / "ablation.json").read_text())
    assert len(payload["rows"]) == 6


def test_diagnose_depth_smoke(moon_dir, tmp_path):
    out = tmp_path / "depth"
    assert main(["diagnose", "depth", "--dataset", str(moon_dir),
                 "--depths", "1,2", "--repeats", "1", "--max-epochs", "3",
                 "--layers", "2", "--hidden", "16", "--out-dim", "16",
                 "--p", "0.7", "--out", str(out)]) == 0
    assert (out / "depth.csv").exists()
    assert (out / "depth.png").exists()
    payload = json.loads((out / "depth.json").read_text())
    assert payload["depths"] == [1, 2]
    assert set(payload["series"]) == {"bandwidth", "bernoulli"}
