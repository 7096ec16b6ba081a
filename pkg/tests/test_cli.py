import json

import pytest

from protoens import load_report
from protoens.cli import main


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_synth")
    code = main([
        "synth", "--out", str(root), "--seed", "9", "--classes", "8",
        "--images-per-class", "3", "--corruption-preset", "disjoint-halves",
    ])
    assert code == 0
    return root


class TestSynthCommand:
    def test_writes_manifest(self, dataset):
        assert (dataset / "manifest.json").is_file()
        doc = json.loads((dataset / "manifest.json").read_text())
        assert doc["class_count"] == 8
        assert doc["backbones"] == ["synth0", "synth1"]
        assert len(doc["images"]) == 24

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "spec.json"
        cfg.write_text(json.dumps({
            "class_count": 4, "images_per_class": 2, "noise_sigma": 0.0,
            "corruption_map": {"only": []},
        }))
        out = tmp_path / "data"
        assert main(["synth", "--out", str(out), "--seed", "1", "--config", str(cfg)]) == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["backbones"] == ["only"]


class TestEvalCommand:
    def test_fold_all_report_layout(self, dataset, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main([
            "eval", "--manifest", str(dataset / "manifest.json"), "--fold", "all",
            "--episodes", "6", "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        doc = load_report(out)
        assert [f["fold"] for f in doc["folds"]] == [0, 1, 2, 3]
        assert 0.0 <= doc["mean_miou"] <= 1.0
        table = capsys.readouterr().out
        assert "Fold 0" in table and "Mean" in table

    def test_single_fold_and_baseline(self, dataset, tmp_path):
        base = tmp_path / "base.json"
        cand = tmp_path / "cand.json"
        args = ["eval", "--manifest", str(dataset / "manifest.json"), "--fold", "0",
                "--episodes", "5", "--seed", "1"]
        assert main(args + ["--out", str(base), "--backbones", "synth0",
                            "--strategy", "single"]) == 0
        assert main(args + ["--out", str(cand), "--baseline", str(base)]) == 0
        doc = load_report(cand)
        assert doc["baseline"]["path"] == str(base)
        assert isinstance(doc["baseline"]["improvement_pct"], float)

    def test_voting_single_backbone_warns_and_degenerates(self, dataset, tmp_path, capsys):
        out = tmp_path / "warn.json"
        code = main([
            "eval", "--manifest", str(dataset / "manifest.json"), "--fold", "0",
            "--episodes", "3", "--backbones", "synth0", "--strategy", "voting",
            "--out", str(out),
        ])
        assert code == 0
        assert "warning" in capsys.readouterr().err
        assert load_report(out)["folds"][0]["config"]["strategy"] == "single"

    def test_unknown_vote_mode_exits_2(self, dataset, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["eval", "--manifest", str(dataset / "manifest.json"),
                  "--vote-mode", "median", "--out", str(tmp_path / "x.json")])
        assert err.value.code == 2

    def test_unknown_backbone_exits_2(self, dataset, tmp_path):
        code = main([
            "eval", "--manifest", str(dataset / "manifest.json"), "--fold", "0",
            "--backbones", "nope", "--out", str(tmp_path / "x.json"),
        ])
        assert code == 2

    def test_missing_manifest_exits_1(self, tmp_path):
        code = main([
            "eval", "--manifest", str(tmp_path / "absent.json"), "--fold", "0",
            "--out", str(tmp_path / "x.json"),
        ])
        assert code == 1

    def test_weights_are_normalized(self, dataset, tmp_path):
        out = tmp_path / "w.json"
        code = main([
            "eval", "--manifest", str(dataset / "manifest.json"), "--fold", "0",
            "--episodes", "3", "--weights", "2,2", "--out", str(out),
        ])
        assert code == 0
        assert load_report(out)["folds"][0]["config"]["weights"] == [0.5, 0.5]

    def test_dump_masks_flag(self, dataset, tmp_path):
        out_dir = tmp_path / "preds"
        code = main([
            "eval", "--manifest", str(dataset / "manifest.json"), "--fold", "1",
            "--episodes", "2", "--out", str(tmp_path / "d.json"),
            "--dump-masks", str(out_dir),
        ])
        assert code == 0
        assert len(list(out_dir.glob("*.png"))) == 2

    def test_repeats_add_fold_rows(self, dataset, tmp_path):
        out = tmp_path / "rep.json"
        code = main([
            "eval", "--manifest", str(dataset / "manifest.json"), "--fold", "2",
            "--episodes", "3", "--repeats", "2", "--out", str(out),
        ])
        assert code == 0
        doc = load_report(out)
        assert [f["seed"] for f in doc["folds"]] == [0, 1]
