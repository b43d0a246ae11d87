"""End-to-end CLI coverage, run in process against qkdlab.cli.main."""

import json
import os

import pytest

from qkdlab.cli import EXIT_FINDING, EXIT_OK, EXIT_USAGE, main


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, argv):
    code, out, err = run_cli(capsys, argv)
    return code, json.loads(out), err


# ---------------------------------------------------------------------------
# argument handling


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("qkdlab ")


def test_bad_bitstring_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["attack-demo", "--message", "01x"])
    assert exc.value.code == EXIT_USAGE


def test_wrong_message_length_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["attack-demo", "--n", "3", "--message", "01"])
    assert exc.value.code == EXIT_USAGE


def test_bad_env_seed_rejected(capsys, monkeypatch):
    monkeypatch.setenv("QKDLAB_SEED", "not-a-number")
    with pytest.raises(SystemExit) as exc:
        main(["attack-demo", "--n", "2", "--trials", "5"])
    assert exc.value.code == EXIT_USAGE


# ---------------------------------------------------------------------------
# attack-demo


ATTACK_ARGS = ["attack-demo", "--n", "2", "--trials", "25", "--seed", "7"]


def test_attack_demo_envelope(capsys):
    code, payload, _ = run_json(capsys, ATTACK_ARGS)
    assert code == EXIT_OK
    assert payload["tool"] == "qkdlab"
    assert payload["command"] == "attack-demo"
    assert payload["seed"] == 7
    assert "generated_at" not in payload  # timestamps are opt-in
    result = payload["result"]
    assert result["success_rate"] == 1.0
    assert result["marginal_check"]["passed"] is True
    assert result["marginal_check"]["max_deviation"] < 1e-9
    assert result["single_basis_guess"]["p_star"] == pytest.approx(0.8535533905, abs=1e-6)
    assert len(result["last_transcript"]["key"]) == 3


def test_attack_demo_deterministic(capsys):
    _, first, _ = run_cli(capsys, ATTACK_ARGS)
    _, second, _ = run_cli(capsys, ATTACK_ARGS)
    assert first == second


def test_attack_demo_env_seed_matches_flag(capsys, monkeypatch):
    _, explicit, _ = run_cli(capsys, ATTACK_ARGS)
    monkeypatch.setenv("QKDLAB_SEED", "7")
    _, via_env, _ = run_cli(capsys, ["attack-demo", "--n", "2", "--trials", "25"])
    assert via_env == explicit


def test_attack_demo_wrong_basis_control(capsys):
    code, payload, _ = run_json(capsys, ATTACK_ARGS + ["--wrong-basis"])
    assert code == EXIT_OK  # a sub-1.0 rate is expected for the control run
    assert payload["result"]["wrong_basis"] is True
    assert payload["result"]["success_rate"] < 1.0


def test_attack_demo_timestamp_opt_in(capsys):
    _, payload, _ = run_json(capsys, ATTACK_ARGS + ["--timestamp"])
    assert "generated_at" in payload


def test_attack_demo_out_file_and_curve_csv(capsys, tmp_path):
    out = tmp_path / "report.json"
    csv_path = tmp_path / "curve.csv"
    code, stdout, _ = run_cli(
        capsys, ATTACK_ARGS + ["--out", str(out), "--curve-csv", str(csv_path)]
    )
    assert code == EXIT_OK
    assert stdout == ""
    payload = json.loads(out.read_text())
    assert payload["command"] == "attack-demo"
    raw = csv_path.read_bytes()
    assert raw.count(b"\r\n") >= 3
    assert raw.startswith(b"n,parity_guess_probability\r\n")
    leftovers = [p for p in os.listdir(tmp_path) if p.startswith(".qkdlab-")]
    assert leftovers == []


# ---------------------------------------------------------------------------
# secrecy


def test_secrecy_report(capsys):
    code, payload, _ = run_json(
        capsys, ["secrecy", "--n", "2", "--budget", "4", "--families", "per_qubit", "--seed", "0"]
    )
    assert code == EXIT_OK
    report = payload["result"]["security_report"]
    assert report["eps_secret_lower"] == pytest.approx(0.5, abs=1e-9)
    assert report["eps_secret_upper"] == pytest.approx(0.5, abs=1e-9)
    assert report["iacc_lower_bits"] == pytest.approx(0.25, abs=1e-9)
    assert report["provenance"]["correctness_source"] == "assumed_zero"
    gap = payload["result"]["gap_report"]
    assert gap["ben_or_required_iacc"] == pytest.approx(2**-5, abs=1e-12)


def test_secrecy_rejects_unknown_family(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["secrecy", "--n", "2", "--families", "psychic"])
    assert exc.value.code == EXIT_USAGE


def test_secrecy_correctness_file_samples(capsys, tmp_path):
    path = tmp_path / "corr.json"
    path.write_text(json.dumps({"samples": [["000", "000"], ["001", "001"],
                                            ["010", "011"], ["111", "111"]]}))
    code, payload, _ = run_json(
        capsys,
        ["secrecy", "--n", "2", "--budget", "4", "--families", "per_qubit",
         "--correctness-file", str(path), "--seed", "0"],
    )
    assert code == EXIT_OK
    report = payload["result"]["security_report"]
    assert report["provenance"]["correctness_source"] == "samples"
    assert report["eps_correct"] > 0.25  # one mismatch in four samples


def test_secrecy_correctness_file_bad_shape(capsys, tmp_path):
    path = tmp_path / "corr.json"
    path.write_text(json.dumps({"nonsense": 1}))
    code, _, err = run_cli(
        capsys, ["secrecy", "--n", "2", "--correctness-file", str(path)]
    )
    assert code == EXIT_USAGE
    assert "samples" in err


# ---------------------------------------------------------------------------
# keystream commands


def test_keystream_plan_meets_target(capsys):
    code, payload, _ = run_json(capsys, ["keystream-plan", "--target-eps", "1e-6"])
    assert code == EXIT_OK
    result = payload["result"]
    assert result["budget"]["eps_total"] <= 1e-6
    assert result["params"]["n0"] >= 1
    assert payload["parameters"]["target_eps"] == 1e-6


def test_keystream_plan_infeasible(capsys):
    code, out, err = run_cli(
        capsys, ["keystream-plan", "--target-eps", "1e-9", "--max-n0", "1000"]
    )
    assert code == EXIT_FINDING
    assert out == ""
    detail = json.loads(err)
    assert detail["error"] == "planning_failed"


def test_keystream_schedule_with_csv(capsys, tmp_path):
    csv_path = tmp_path / "schedule.csv"
    code, payload, _ = run_json(
        capsys,
        ["keystream-schedule", "--n0", "60000", "--ell0", "12000",
         "--rounds", "5", "--csv", str(csv_path)],
    )
    assert code == EXIT_OK
    assert len(payload["result"]["rounds"]) == 5
    raw = csv_path.read_bytes()
    assert raw.startswith(b"i,n_i,ell_i,eps_i,cumulative_eps\r\n")
    assert raw.endswith(b"\r\n")


def test_keystream_simulate_clean_run(capsys):
    code, payload, _ = run_json(
        capsys,
        ["keystream-simulate", "--n0", "60000", "--ell0", "12000",
         "--rounds", "30", "--abort-prob", "0.2", "--seed", "1"],
    )
    assert code == EXIT_OK
    result = payload["result"]
    assert result["bits_emitted"] == 30 * 256
    assert result["conservation_ok"] is True
    assert result["total_retries"] >= 0


def test_keystream_simulate_underflow(capsys):
    code, out, err = run_cli(
        capsys,
        ["keystream-simulate", "--n0", "60000", "--ell0", "300", "--rounds", "50",
         "--abort-prob", "0.6", "--charge-per-attempt", "--seed", "0"],
    )
    assert code == EXIT_FINDING
    assert out == ""
    assert json.loads(err)["error"] == "key_ledger_underflow"


# ---------------------------------------------------------------------------
# verify-composition and rsa-demo


def test_verify_composition_biased_otp(capsys):
    code, payload, _ = run_json(capsys, ["verify-composition", "--seed", "0"])
    assert code == EXIT_OK
    result = payload["result"]
    assert result["all_within_bound"] is True
    assert result["mode"] == "exact"
    assert result["rows"][0]["advantage_total"] == pytest.approx(0.1, abs=1e-12)


def test_verify_composition_attack_otp_flags_violation(capsys):
    code, payload, _ = run_json(
        capsys, ["verify-composition", "--example", "attack-otp", "--n", "3", "--seed", "0"]
    )
    assert code == EXIT_FINDING
    result = payload["result"]
    assert result["bound_violated"] is True
    assert result["estimate"]["advantage"] == pytest.approx(0.5, abs=1e-12)


def test_verify_composition_sample_mode(capsys):
    code, payload, _ = run_json(
        capsys,
        ["verify-composition", "--example", "attack-otp", "--n", "3",
         "--mode", "sample", "--trials", "2000", "--seed", "0"],
    )
    assert code == EXIT_FINDING
    assert payload["result"]["estimate"]["mode"] == "sample"
    assert payload["result"]["estimate"]["accept_real"] == 1.0


def test_rsa_demo_single(capsys):
    code, payload, _ = run_json(capsys, ["rsa-demo", "--bid", "123", "--seed", "4"])
    assert code == EXIT_OK
    result = payload["result"]
    assert result["forgery_doubled"] is True
    assert result["bob_bid"] == 246
    assert result["winner"] == "bob"


def test_rsa_demo_sweep(capsys):
    code, payload, _ = run_json(
        capsys, ["rsa-demo", "--auctions", "5", "--max-bid", "400", "--seed", "4"]
    )
    assert code == EXIT_OK
    assert payload["result"]["bob_win_rate"] == 1.0
    assert len(payload["result"]["outcomes"]) == 5
