import csv
import io
import json
import shutil
import subprocess

import pytest

from pbncontrol import cli
from pbncontrol.data import fixture_path
from pbncontrol.pbn import NodeSpec, PBNSpec, dumps_spec, named_table, parse_spec, str_to_state, transition_support

from conftest import named_spec, random_spec


@pytest.fixture
def spec_file(tmp_path):
    def write(spec, name="net.spec"):
        p = tmp_path / name
        p.write_text(dumps_spec(spec))
        return p
    return write


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestSimulate:
    def test_zero_steps(self, capsys, spec_file, rng):
        p = spec_file(random_spec(rng, 4))
        code, out, _ = run(capsys, "simulate", "--spec", str(p), "--steps", "0", "--initial", "1010")
        assert code == 0 and out.split() == ["1010"]

    def test_deterministic_spec_any_seed(self, capsys, spec_file):
        p = spec_file(named_spec([[1, 2], [0, 2], [0, 1]], [{"OR": 1.0}, {"AND": 1.0}, {"XOR": 1.0}]))
        outs = {run(capsys, "simulate", "--spec", str(p), "--steps", "6", "--initial", "100", "--seed", str(s))[1]
                for s in range(4)}
        assert len(outs) == 1

    def test_trajectory_follows_support(self, capsys, spec_file, rng):
        spec = random_spec(rng, 5)
        p = spec_file(spec)
        _, out, _ = run(capsys, "simulate", "--spec", str(p), "--steps", "30", "--seed", "3")
        states = [str_to_state(s) for s in out.split()]
        assert len(states) == 31
        for a, b in zip(states, states[1:]):
            assert b in transition_support(spec, a).states.tolist()

    def test_malformed_spec(self, capsys, tmp_path):
        p = tmp_path / "bad.spec"
        p.write_text('{"n": 1,\n "nodes": [}')
        code, _, err = run(capsys, "simulate", "--spec", str(p))
        assert code == cli.EXIT_CONFIG and "line 2" in err


class TestAttractors:
    def read(self, text):
        return list(csv.DictReader(io.StringIO(text)))

    def test_single_attractor(self, capsys, spec_file):
        # gene 1 holds or is forced on, gene 2 ORs both: everything flows to 11
        p = spec_file(PBNSpec((NodeSpec([0], [(0, 1), (1, 1)], [0.5, 0.5]),
                               NodeSpec([0, 1], [named_table("OR", 2)], [1.0]))))
        code, out, _ = run(capsys, "attractors", "--spec", str(p), "--rollouts", "2000")
        rows = self.read(out)
        assert code == 0
        assert [r["attractor_id"] for r in rows] == ["0", "timeout"]
        assert float(rows[0]["frequency"]) == 1.0 and rows[0]["suggested_target"] == "1"

    def test_rows_sum_to_one_and_min_suggested(self, capsys, spec_file, rng):
        spec = random_spec(rng, 6, max_funcs=2)
        p = spec_file(spec)
        _, out, _ = run(capsys, "attractors", "--spec", str(p), "--rollouts", "3000", "--max-steps", "5")
        rows = self.read(out)
        assert sum(float(r["frequency"]) for r in rows) == pytest.approx(1.0, abs=1e-12)
        body = rows[:-1]
        best = min(body, key=lambda r: (float(r["frequency"]), r["states"].split()[0][::-1]))
        flagged = [r for r in body if r["suggested_target"] == "1"]
        assert len(flagged) == 1 and float(flagged[0]["frequency"]) == float(best["frequency"])

    def test_too_large_instructs_monte_carlo(self, capsys, spec_file):
        p = spec_file(named_spec([[i, (i + 1) % 21] for i in range(21)], [{"AND": 1.0}] * 21))
        code, _, err = run(capsys, "attractors", "--spec", str(p))
        assert code == cli.EXIT_CONFIG and "--sampled" in err

    def test_csv_to_out_dir(self, capsys, tmp_path):
        code, _, _ = run(capsys, "attractors", "--spec", str(fixture_path("pbn10.spec")), "--rollouts", "2000",
                         "--out", str(tmp_path / "o"))
        assert code == 0
        assert (tmp_path / "o" / "attractors.csv").read_text().startswith("attractor_id,size,states")


def small_config(tmp_path, iterations=10_000):
    cfg = {
        "spec": str(fixture_path("pbn10.spec")),
        "rollouts": 5000,
        "train": {"iterations": iterations, "horizon": 11, "success_reward": 5.0, "buffer_capacity": 256,
                  "gamma": 0.95, "sync_period": 500, "batch_size": 32, "hidden": [16, 16], "seed": 3},
    }
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return p


class TestTrainEval:
    def test_train_outputs_and_manifest_replay(self, capsys, tmp_path):
        cfg = small_config(tmp_path)
        code, _, _ = run(capsys, "train", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q")
        assert code == 0
        a = tmp_path / "a"
        metrics = (a / "metrics.csv").read_text().splitlines()
        assert len(metrics) == 1 + 2                       # header + 10,000 / 5,000 rows
        manifest = json.loads((a / "manifest.json").read_text())
        assert manifest["seed"] == 3
        spec_bytes = fixture_path("pbn10.spec").read_bytes()
        if shutil.which("git"):
            ref = subprocess.run(["git", "hash-object", "--stdin"], input=spec_bytes,
                                 capture_output=True, check=True).stdout.decode().strip()
            assert manifest["spec_sha1"] == ref
        assert manifest["spec_sha1"] == cli.git_blob_sha1(spec_bytes)
        # replaying the manifest reproduces the metrics byte for byte
        code, _, _ = run(capsys, "train", "--config", str(a / "manifest.json"), "--out", str(tmp_path / "b"), "-q")
        assert code == 0
        assert (tmp_path / "b" / "metrics.csv").read_bytes() == (a / "metrics.csv").read_bytes()

        code, out, _ = run(capsys, "eval", "--config", str(cfg), "--out", str(a), "--episodes", "300", "-q")
        assert code == 0 and "over 300 episodes" in out
        report = json.loads((a / "eval.json").read_text())
        assert report["episodes"] == 300 and 0 <= report["success_rate"] <= 1

    def test_env_var_output_dir(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("PBNCONTROL_OUT", str(tmp_path / "env-out"))
        code, _, _ = run(capsys, "train", "--config", str(small_config(tmp_path, 5_000)), "-q")
        assert code == 0 and (tmp_path / "env-out" / "checkpoint.npz").exists()

    def test_eval_defaults(self):
        run_cfg = cli.load_run_config("pbn10")
        assert run_cfg.eval_episodes == 10_000
        assert run_cfg.train.iterations // 5_000 == 60

    def test_shipped_configs_match_presets(self):
        from pbncontrol.agent import PRESETS
        for name in cli.SHIPPED_CONFIGS:
            t = cli.load_run_config(name).train
            for k, v in PRESETS[name].items():
                assert getattr(t, k) == v, (name, k)

    def test_eval_without_checkpoint(self, capsys, tmp_path):
        code, _, err = run(capsys, "eval", "--config", str(small_config(tmp_path)), "--out", str(tmp_path / "x"))
        assert code == cli.EXIT_CONFIG and "checkpoint" in err


class TestErrors:
    def test_unknown_config(self, capsys):
        code, _, err = run(capsys, "train", "--config", "no-such-config")
        assert code == cli.EXIT_CONFIG and "no such config" in err

    def test_invalid_field_named(self, capsys, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"spec": str(fixture_path("pbn10.spec")), "train": {"gamma": 1.5}}))
        code, _, err = run(capsys, "train", "--config", str(p))
        assert code == cli.EXIT_CONFIG and "gamma" in err

    def test_unknown_field_named(self, capsys, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"spec": str(fixture_path("pbn10.spec")), "trian": {}}))
        code, _, err = run(capsys, "baseline", "--config", str(p))
        assert code == cli.EXIT_CONFIG and "trian" in err

    def test_runtime_error_code(self, capsys, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise FloatingPointError("diverged")
        monkeypatch.setattr(cli, "train", boom)
        code, _, err = run(capsys, "train", "--config", str(small_config(tmp_path)), "--out", str(tmp_path / "o"))
        assert code == cli.EXIT_RUNTIME and "diverged" in err

    def test_explicit_target_must_be_attractor(self, capsys, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"spec": str(fixture_path("pbn10.spec")), "target": ["1111111111"],
                                 "train": {"iterations": 5000}}))
        code, _, err = run(capsys, "baseline", "--config", str(p), "--episodes", "10")
        assert code == cli.EXIT_CONFIG and "not an attractor" in err


class TestBaselineInfer:
    def test_baseline(self, capsys, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"spec": str(fixture_path("pbn10.spec")), "target": ["0000000000"],
                                 "train": {"iterations": 5000}}))
        code, out, _ = run(capsys, "baseline", "--config", str(p), "--episodes", "50", "--out", str(tmp_path / "o"))
        assert code == 0 and "random interventions" in out
        report = json.loads((tmp_path / "o" / "baseline.json").read_text())
        assert report["episodes"] == 50 and report["mean_interventions"] >= 1

    def test_infer_round_trip(self, capsys, tmp_path):
        code, out, _ = run(capsys, "infer", "--expression", str(fixture_path("melanoma.csv")), "--no-self")
        assert code == 0
        spec = parse_spec(out)
        assert spec.n == 7
        assert json.loads(out)["genes"][0] == "pirin"
        dest = tmp_path / "inf" / "m.spec"
        run(capsys, "infer", "--expression", str(fixture_path("melanoma.csv")), "--no-self", "--out", str(dest))
        assert parse_spec(dest.read_text()) == spec

    def test_infer_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "infer", "--expression", str(tmp_path / "none.csv"))
        assert code == cli.EXIT_CONFIG


def test_console_script_entry_point():
    exe = shutil.which("pbncontrol")
    if exe is None:
        pytest.skip("package not installed with its console script")
    res = subprocess.run([exe, "simulate", "--spec", str(fixture_path("pbn10.spec")), "--steps", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and len(res.stdout.split()) == 3
