import json
from pathlib import Path

import pytest

from zsl_kep.cli import main

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "e2e"
E2E_CONFIG = str(FIXTURE_DIR / "config.json")


def _write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_run_happy_path(tmp_path, capsys):
    out = tmp_path / "pred.json"
    assert main(["run", "--config", E2E_CONFIG, "--output", str(out)]) == 0
    err = capsys.readouterr().err
    assert "claims processed: 4" in err
    data = json.loads(out.read_text(encoding="utf-8"))
    assert len(data) == 4


def test_run_print_config(tmp_path, capsys):
    assert main(["run", "--config", E2E_CONFIG, "--print-config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["claim_top_k"] == 70
    assert cfg["keypoint_top_k"] == 12
    assert cfg["truncate_claim"] == 55
    assert cfg["truncate_keypoint"] == 9
    assert cfg["temperature"] == 0.0
    assert cfg["top_p"] == 0.8
    assert cfg["max_tokens_keypoints"] == 512
    assert cfg["max_tokens_prediction"] == 1024
    assert cfg["k1"] == 1.2
    assert cfg["b"] == 0.75
    assert cfg["workers"] == 4


def _minimal_setup(tmp_path, n_claims=2, stores_for=(0, 1), script=None):
    claims = [{"claim": f"test claim {i}"} for i in range(n_claims)]
    claims_path = _write_json(tmp_path / "claims.json", claims)
    store_dir = tmp_path / "stores"
    store_dir.mkdir()
    for cid in stores_for:
        (store_dir / f"{cid}.json").write_text(
            json.dumps({"url": "u", "url2text": [f"test claim {cid} words", "filler"]}) + "\n",
            encoding="utf-8")
    if script is None:
        script = {str(i): [
            "PRIMITIVE:\n1. test point",
            "EVIDENCE:\nQ1: q?\nA1: a\nTYPE1: Abstractive\nCITE1: 0_0\n\n"
            "JUSTIFICATION: j\n\nVERDICT: Supported",
        ] for i in range(n_claims)}
    script_path = _write_json(tmp_path / "script.json", script)
    config = {
        "claims_path": claims_path,
        "store_dir": str(store_dir),
        "output_path": str(tmp_path / "pred.json"),
        "backend": "mock",
        "mock_script_path": script_path,
    }
    return _write_json(tmp_path / "config.json", config)


def test_run_missing_store_names_path(tmp_path, capsys):
    config = _minimal_setup(tmp_path, n_claims=2, stores_for=(0,))
    assert main(["run", "--config", config]) == 1
    err = capsys.readouterr().err
    assert "1.json" in err


def test_run_invalid_truncation_config(tmp_path, capsys):
    config_path = Path(_minimal_setup(tmp_path))
    cfg = json.loads(config_path.read_text(encoding="utf-8"))
    cfg["truncate_claim"] = 80
    _write_json(config_path, cfg)
    assert main(["run", "--config", str(config_path)]) == 1
    assert "truncate_claim" in capsys.readouterr().err


def test_run_unknown_config_field(tmp_path, capsys):
    config_path = Path(_minimal_setup(tmp_path))
    cfg = json.loads(config_path.read_text(encoding="utf-8"))
    cfg["not_a_field"] = 1
    _write_json(config_path, cfg)
    assert main(["run", "--config", str(config_path)]) == 1
    assert "not_a_field" in capsys.readouterr().err


def test_run_bad_backend(tmp_path, capsys):
    config_path = Path(_minimal_setup(tmp_path))
    cfg = json.loads(config_path.read_text(encoding="utf-8"))
    cfg["backend"] = "carrier-pigeon"
    _write_json(config_path, cfg)
    assert main(["run", "--config", str(config_path)]) == 1
    assert "backend" in capsys.readouterr().err


def test_run_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err


def test_run_exit_2_on_failed_claim(tmp_path):
    config = _minimal_setup(tmp_path, n_claims=1, stores_for=(0,), script={"0": []})
    assert main(["run", "--config", config]) == 2
    pred = json.loads((tmp_path / "pred.json").read_text(encoding="utf-8"))
    assert len(pred) == 1
    assert pred[0]["pred_label"] == "Not Enough Evidence"


def test_run_worker_override_still_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["run", "--config", E2E_CONFIG, "--output", str(out1), "--workers", "1"]) == 0
    assert main(["run", "--config", E2E_CONFIG, "--output", str(out2), "--workers", "4"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_run_interrupt_flushes_completed_reports(tmp_path, capsys, monkeypatch):
    config = _minimal_setup(tmp_path, n_claims=3, stores_for=(0, 1, 2))
    config_path = Path(config)
    cfg = json.loads(config_path.read_text(encoding="utf-8"))
    cfg["workers"] = 1
    _write_json(config_path, cfg)

    import zsl_kep.cli as cli_mod
    real_build = cli_mod._build_gateway

    class _Interrupting:
        def __init__(self, inner):
            self._inner = inner

        def complete(self, request, claim_id=None):
            if claim_id == 2:
                raise KeyboardInterrupt
            return self._inner.complete(request, claim_id)

    monkeypatch.setattr(cli_mod, "_build_gateway",
                        lambda c: _Interrupting(real_build(c)))
    assert main(["run", "--config", str(config_path)]) == 130
    assert "interrupted" in capsys.readouterr().err
    pred = json.loads((tmp_path / "pred.json").read_text(encoding="utf-8"))
    assert [row["claim_id"] for row in pred] == [0, 1]


def test_score_self_and_report(tmp_path, capsys):
    out = tmp_path / "pred.json"
    report = tmp_path / "scores.json"
    assert main(["run", "--config", E2E_CONFIG, "--output", str(out)]) == 0
    assert main(["score", "--pred", str(out), "--gold", str(FIXTURE_DIR / "claims.json"),
                 "--report", str(report)]) == 0
    err = capsys.readouterr().err
    assert "averitec=1.0000" in err
    payload = json.loads(report.read_text(encoding="utf-8"))
    assert payload["aggregate"]["averitec"] == 1.0
    assert len(payload["per_claim"]) == 4


def test_score_default_report_path(tmp_path, capsys):
    out = tmp_path / "pred.json"
    main(["run", "--config", E2E_CONFIG, "--output", str(out)])
    capsys.readouterr()
    assert main(["score", "--pred", str(out),
                 "--gold", str(FIXTURE_DIR / "claims.json")]) == 0
    assert (tmp_path / "pred.scores.json").exists()


def test_score_missing_gold_field(tmp_path, capsys):
    out = tmp_path / "pred.json"
    main(["run", "--config", E2E_CONFIG, "--output", str(out)])
    blind_gold = _write_json(tmp_path / "gold.json",
                             [{"claim": f"c{i}"} for i in range(4)])
    assert main(["score", "--pred", str(out), "--gold", blind_gold]) == 1


def test_inspect_unknown_claim(capsys):
    assert main(["inspect", "--config", E2E_CONFIG, "--claim", "42"]) == 1
    assert "unknown claim id" in capsys.readouterr().err


def test_inspect_shows_groups_and_unified_string(capsys):
    assert main(["inspect", "--config", E2E_CONFIG, "--claim", "0"]) == 0
    out = capsys.readouterr().out
    assert "groups: 5" in out  # 3 primitives + 1 combined + claim
    assert "kind=claim cap=70" in out
    assert "unified retrieval string:" in out
    assert "<0_1>" in out


def test_inspect_no_llm(capsys):
    assert main(["inspect", "--config", E2E_CONFIG, "--claim", "0", "--no-llm"]) == 0
    out = capsys.readouterr().out
    assert "keypoint prompt" in out
    assert "groups: 1" in out
    assert "kind=claim cap=70" in out
