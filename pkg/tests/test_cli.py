import json
import subprocess
import sys

import pytest

from lattice_agreement import cli
from lattice_agreement.documents import dumps, instance_to_doc
from lattice_agreement import chain_space, AgreementInstance


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestExitCodes:
    def test_ok(self, capsys):
        code, out, _ = run(capsys, "verify-lattice", "--lattice", "chain:m=8")
        assert code == cli.EXIT_OK
        assert out.splitlines()[0] == "OK, 0 violations"

    def test_unknown_flag(self, capsys):
        code, _, err = run(capsys, "verify-lattice", "--bogus")
        assert code == cli.EXIT_USAGE
        assert err.startswith("error[usage]:") and err.count("\n") == 1

    def test_unknown_subcommand(self, capsys):
        assert run(capsys, "frobnicate")[0] == cli.EXIT_USAGE

    def test_budget(self, capsys):
        code, _, err = run(capsys, "run-sync", "--n", "3", "--f", "3")
        assert code == cli.EXIT_BUDGET and err.startswith("error[budget]")

    def test_model_budget(self, capsys):
        assert run(capsys, "run-model", "--n", "10", "--f", "10", "--runs", "2")[0] == cli.EXIT_BUDGET

    def test_malformed_document(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "verify-lattice", "--lattice", str(bad))
        assert code == cli.EXIT_INPUT and err.startswith("error[input]")

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "run-dr", "--n", "3", "--f", "1", "--k", "1",
                         "--instance", str(tmp_path / "nope.json"))
        assert code == cli.EXIT_INPUT

    def test_bad_trace(self, capsys, tmp_path):
        t = tmp_path / "t.jsonl"
        t.write_text('{"kind":"HEADER","version":1}\n')
        code, _, err = run(capsys, "replay", str(t))
        assert code == cli.EXIT_TRACE and err.startswith("error[trace]")

    def test_incomparable_instance(self, capsys, tmp_path):
        doc = {
            "kind": "instance",
            "lattice": {"kind": "lattice", "family": "powerset", "params": {"weights": {"a": 1, "b": 1}}},
            "inputs": [["a"], ["b"]],
            "outputs": [["a"], ["b"]],
        }
        p = tmp_path / "i.json"
        p.write_text(json.dumps(doc))
        code, _, err = run(capsys, "run-sync", "--lattice", "powerset:u=2", "--n", "2", "--f", "1",
                           "--instance", str(p))
        assert code == cli.EXIT_PROTOCOL

    def test_distinct_codes(self):
        codes = [cli.EXIT_OK, cli.EXIT_VIOLATIONS, cli.EXIT_USAGE, cli.EXIT_INPUT,
                 cli.EXIT_BUDGET, cli.EXIT_PROTOCOL, cli.EXIT_TRACE]
        assert len(set(codes)) == len(codes)


class TestLatticeSpecs:
    @pytest.mark.parametrize("spec", ["chain:m=5", "powerset:u=3", "vector_clock:dim=2;cap=2",
                                      "nonnormal", "powerset:a=1;b=3"])
    def test_parse(self, spec):
        assert cli.parse_lattice(spec).lattice.elements

    def test_file(self, tmp_path):
        p = tmp_path / "l.json"
        p.write_text('{"kind": "lattice", "family": "chain", "params": {"m": 3}}')
        assert len(cli.parse_lattice(str(p)).lattice.elements) == 4

    def test_nonnormal_reported(self, capsys):
        code, out, _ = run(capsys, "verify-lattice", "--lattice", "nonnormal")
        assert code == cli.EXIT_OK
        assert "normal: no" in out


class TestProtocolCommands:
    def test_gen_instance_round_trip(self, capsys, tmp_path):
        p = tmp_path / "inst.json"
        assert run(capsys, "gen-instance", "--lattice", "chain:m=9", "--n", "5", "--seed", "3",
                   "--out", str(p))[0] == 0
        code, out, _ = run(capsys, "run-sync", "--lattice", "chain:m=9", "--n", "5", "--f", "2",
                           "--instance", str(p), "--format", "json")
        s = json.loads(out)
        assert code == 0 and s["gamma_reconciled"] == 0 and s["valid"]

    def test_delay_max_keeps_gamma(self, capsys):
        code, out, _ = run(capsys, "run-dr", "--n", "6", "--f", "2", "--k", "4", "--initial", "worst",
                           "--scheduler", "delay-max", "--format", "json", "--seed", "5")
        s = json.loads(out)
        assert code == 0
        assert s["gamma"] == s["gamma_reconciled"] == s["Dprime"] == 10

    def test_crash_schedule_file(self, capsys, tmp_path):
        cs = tmp_path / "c.json"
        cs.write_text(json.dumps({"2": {"round": 1, "recipients": [0]}}))
        code, out, _ = run(capsys, "run-sync", "--n", "3", "--f", "1", "--crash-schedule", str(cs),
                           "--format", "json")
        assert code == 0 and json.loads(out)["crashed"] == [2]

    def test_trace_and_replay(self, capsys, tmp_path):
        t = tmp_path / "t.jsonl"
        code, _, _ = run(capsys, "run-dr", "--n", "5", "--f", "2", "--k", "3", "--scheduler", "uniform",
                         "--lattice", "powerset:u=3", "--seed", "8", "--out", str(t))
        assert code == 0
        code, out, _ = run(capsys, "replay", str(t))
        assert code == 0 and json.loads(out)["protocol"] == "dr"

    def test_instance_size_mismatch(self, capsys, tmp_path):
        qm = chain_space(10)
        p = tmp_path / "i.json"
        p.write_text(dumps(instance_to_doc(AgreementInstance([1, 2], [2, 2]), qm)))
        code, _, _ = run(capsys, "run-sync", "--n", "3", "--f", "1", "--instance", str(p))
        assert code == cli.EXIT_INPUT

    def test_bad_scheduler(self, capsys):
        code, _, _ = run(capsys, "run-dr", "--n", "3", "--f", "1", "--k", "1", "--scheduler", "nope")
        assert code == cli.EXIT_USAGE


class TestModelCommands:
    def test_pivot_shape(self, capsys):
        code, out, _ = run(capsys, "run-model", "--f", "200,800", "--k", "2,3,4,5", "--initial", "worst",
                           "--runs", "20")
        lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
        assert code == 0
        assert lines[0].split() == ["k=2", "k=3", "k=4", "k=5"]
        assert [ln.split()[0] for ln in lines[1:]] == ["f=200", "f=800"]

    def test_csv_columns(self, capsys):
        code, out, _ = run(capsys, "run-model", "--f", "200", "--k", "2", "--runs", "10", "--format", "csv")
        header = out.splitlines()[1].split(",")
        assert header[:9] == ["n", "f", "p_f", "k", "initial", "sampling", "crash_mode", "runs", "successes"]
        assert out.startswith("# seed=0 version=")

    def test_json(self, capsys):
        code, out, _ = run(capsys, "sweep", "--f", "20", "--n", "100", "--k", "1,2", "--runs", "10",
                           "--format", "json")
        doc = json.loads(out)
        assert code == 0 and len(doc["rows"]) == 2

    def test_preset_and_discrepancy_report(self, capsys):
        code, out, _ = run(capsys, "sweep", "--preset", "table2", "--runs", "10")
        assert code == 0
        assert "compared with published rates" in out

    def test_unknown_preset(self, capsys):
        assert run(capsys, "sweep", "--preset", "table9")[0] == cli.EXIT_USAGE

    def test_bad_list(self, capsys):
        assert run(capsys, "sweep", "--sampling", "without,sideways")[0] == cli.EXIT_USAGE


def test_byte_identical_repeats(capsys, tmp_path):
    argv = ["run-dr", "--n", "7", "--f", "2", "--k", "3", "--scheduler", "uniform", "--seed", "4"]
    outs = []
    for i in range(2):
        t = tmp_path / f"t{i}.jsonl"
        run(capsys, *argv, "--out", str(t))
        outs.append(t.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "lattice_agreement", "verify-lattice", "--lattice", "chain:m=3"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0 and "OK, 0 violations" in res.stdout
