import json

import pytest

from naf.cli import main


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    assert main(["--seed", "1", "train", "--out", str(root / "m")]) == 0
    return root


def _json(path):
    return json.loads(path.read_text())


def test_train_outputs(trained):
    m = trained / "m"
    for name in ["plan.json", "shard_0.json", "shard_1.json", "full.json", "cover.json"]:
        assert (m / name).exists()
    cover = _json(m / "cover.json")
    assert set(cover["safe_index"]) == {"C1", "C2"}
    assert cover["safe_index"]["C1"] != cover["safe_index"]["C2"]


def test_train_m2(tmp_path):
    assert main(["train", "--m", "2", "--out", str(tmp_path / "m")]) == 0
    assert len(_json(tmp_path / "m" / "cover.json")["models"]) == 3


def test_train_bad_json_leaves_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"doc": "a", "tags": []}\n{"doc": \n')
    assert main(["train", "--data", str(bad), "--out", str(tmp_path / "out")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_train_multiplicity_error(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    data.write_text("".join(json.dumps({"doc": f"x {i}", "tags": ["C"]}) + "\n" for i in range(3)))
    assert main(["train", "--data", str(data), "--out", str(tmp_path / "out")]) == 2
    assert "'C'" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_protect_cp_delta(trained, capsys):
    out = trained / "pd.json"
    assert main(["protect", "--models", str(trained / "m"), "--method", "cp-delta", "--out", str(out)]) == 0
    desc = _json(out)
    z = desc["z_stats"]
    assert 0 < z["z_min"] <= z["z_median"] <= z["z_max"] <= 1
    assert sum(z["histogram"]["counts"]) == z["contexts"]
    assert "Z in" in capsys.readouterr().out


def test_protect_cp_k(trained):
    out = trained / "pk.json"
    assert main(["protect", "--models", str(trained / "m"), "--method", "cp-k", "--k", "8", "--out", str(out)]) == 0
    assert _json(out)["k"] == 8.0


def test_protect_smooth_note(trained, capsys):
    out = trained / "ps.json"
    args = ["protect", "--models", str(trained / "m"), "--method", "smooth-cp-k", "--k", "0",
            "--base", "shard_0.json", "--out", str(out)]
    assert main(args) == 0
    assert "recovering its guarantee" in capsys.readouterr().out


def test_protect_missing_models(tmp_path):
    assert main(["protect", "--models", str(tmp_path), "--method", "cp-k", "--k", "1",
                 "--out", str(tmp_path / "x.json")]) == 2
    assert not (tmp_path / "x.json").exists()


def test_sample_deterministic_with_report(trained):
    desc = trained / "pk.json"
    runs = []
    for i in range(2):
        out, rep = trained / f"s{i}.jsonl", trained / f"r{i}.json"
        assert main(["--seed", "5", "sample", "--protected", str(desc), "--num", "20",
                     "--out", str(out), "--report", str(rep)]) == 0
        runs.append((out.read_bytes(), rep.read_bytes()))
    assert runs[0] == runs[1]
    report = json.loads(runs[0][1])
    assert {"nu", "k_tilde", "nu_ci", "k", "exact"} <= set(report)
    line = json.loads(runs[0][0].splitlines()[0])
    assert {"text", "log_p", "min_log_q", "ratio_bits", "attempts"} <= set(line)
    assert line["ratio_bits"] <= 8.0 + 1e-9


def test_sample_cp_delta(trained):
    out = trained / "sd.jsonl"
    assert main(["sample", "--protected", str(trained / "pd.json"), "--num", "5", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 5


def test_sample_exhaustion(trained, tmp_path, capsys):
    desc = _json(trained / "pk.json")
    desc.update(k=0.0, max_attempts=1, models_dir=str(trained / "m"))
    path = tmp_path / "tight.json"
    path.write_text(json.dumps(desc))
    assert main(["sample", "--protected", str(path), "--num", "200"]) == 2
    assert "after 1 attempts" in capsys.readouterr().err


def test_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "--only", "example-3.2"]) == 0
    assert "example-3.2" in capsys.readouterr().out
    assert main(["verify", "--corrupt", "partition", "--seeds", "3"]) == 1
    assert "partition-function lemma" in capsys.readouterr().out
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instances": ["corollary", "partition"], "seeds": 3}))
    out = tmp_path / "v.json"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    assert [c["name"] for c in _json(out)["checks"]] == ["corollary", "partition"]


def test_enum_cap_env(monkeypatch, capsys):
    monkeypatch.setenv("NAF_ENUM_CAP", "1")
    assert main(["verify", "--only", "naf-cp-delta", "--seeds", "2"]) == 2
    assert "cap" in capsys.readouterr().err


def test_report(trained):
    out = trained / "report"
    assert main(["report", "--models", str(trained / "m"), "--out", str(out), "--samples", "400"]) == 0
    for name in ["log_ratios.png", "log_ratios.csv", "context_z.png", "context_z.csv",
                 "spiked.png", "spiked.csv", "tagged.csv"]:
        assert (out / name).stat().st_size > 0
    rows = (out / "tagged.csv").read_text().splitlines()
    assert rows[0] == "tag,doc,p_full,log_ratio_bits,accept_prob"
    assert len(rows) == 3


def test_demo_pipeline_never_emits_injected(trained):
    from naf.demo import INJECTED

    desc = trained / "p95.json"
    assert main(["protect", "--models", str(trained / "m"), "--method", "cp-k", "--k-percentile", "95",
                 "--out", str(desc)]) == 0
    out = trained / "s95.jsonl"
    assert main(["sample", "--protected", str(desc), "--num", "10000", "--out", str(out)]) == 0
    texts = [json.loads(line)["text"] for line in out.read_text().splitlines()]
    assert len(texts) == 10000
    assert not set(INJECTED.values()) & set(texts)
