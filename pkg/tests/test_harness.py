import csv
import json
import math

import pytest

from wavepinn import cli
from wavepinn.harness import AGGREGATE_COLUMNS, SCALE_PRESETS, ConfigError, RunConfig, aggregate, apply_scale, run_experiment
from wavepinn.pde import manufactured_reference, write_reference_csv


def tiny(tmp_path, name="run", **kw):
    base = dict(hidden_layers=1, hidden_width=4, iterations=3, nx=5, nt=4, eval_nx=6, eval_nt=5, output_dir=str(tmp_path / name))
    base.update(kw)
    return RunConfig(**base)


def strip_wall(doc):
    doc = dict(doc)
    doc.pop("wall_s")
    return doc


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.hidden_layers, cfg.hidden_width, cfg.iterations, cfg.seed) == (4, 512, 1000, 5)
        assert (cfg.nx, cfg.nt, cfg.n_random, cfg.gabor_omega_init) == (101, 101, 2500, 3)
        assert cfg.weights.residual == cfg.weights.boundary == cfg.weights.initial == 1.0

    def test_w_variant_from_name(self):
        assert RunConfig(activation="softgabortanhw").w_variant
        assert not RunConfig(activation="softgabortanh").w_variant

    @pytest.mark.parametrize(
        "bad",
        [
            {"activation": "relu"},
            {"problem": "heat"},
            {"gabor_omega_init": 4},
            {"problem": "navier_stokes"},
            {"hidden_width": 0},
            {"nx": 1},
            {"weight_boundary": -1.0},
            {"iteration_count": "epochs"},
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            RunConfig(**bad)

    def test_dict_round_trip(self):
        cfg = RunConfig(problem="convection", activation="softgabortanhw", constants={"beta": 10}, seed=7)
        assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="lr"):
            RunConfig.from_dict({"lr": 0.1})

    def test_scale_key_then_overrides(self):
        cfg = RunConfig.from_dict({"scale": "desk", "iterations": 20})
        assert cfg.hidden_width == 64 and cfg.nx == 51 and cfg.iterations == 20
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"scale": "huge"})

    def test_apply_scale(self):
        cfg = apply_scale(RunConfig(), "desk")
        assert {k: getattr(cfg, k) for k in SCALE_PRESETS["desk"]} == SCALE_PRESETS["desk"]
        assert apply_scale(cfg, "paper").hidden_width == 512

    def test_from_json_errors(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            RunConfig.from_json(path)
        with pytest.raises(ConfigError):
            RunConfig.from_json(tmp_path / "missing.json")


class TestRun:
    def test_artifacts(self, tmp_path):
        cfg = tiny(tmp_path, activation="softgausstanh")
        report = run_experiment(cfg)
        out = tmp_path / "run"
        assert {p.name for p in out.iterdir()} == {"report.json", "loss_history.csv", "prediction_grid.csv", "model.json"}
        grid = list(csv.reader((out / "prediction_grid.csv").open()))
        assert grid[0] == ["x", "t", "u_pred", "u_exact", "abs_err"]
        assert len(grid) - 1 == 6 * 5
        hist = list(csv.reader((out / "loss_history.csv").open()))
        assert hist[0] == ["iter", "loss", "grad_norm", "step", "evals"] and len(hist) == 2 + report.trace["iterations"]
        doc = json.loads((out / "report.json").read_text())
        assert RunConfig.from_dict(doc["config"]) == cfg
        assert doc["status"] == "max_iters" and doc["eval"]["n_points"] == 30
        assert set(doc["activation_coefficients"][0]) == {"alpha", "beta"}

    def test_deterministic(self, tmp_path):
        a = run_experiment(tiny(tmp_path, "a", activation="softmextanh"), write=False).to_dict()
        b = run_experiment(tiny(tmp_path, "a", activation="softmextanh"), write=False).to_dict()
        assert strip_wall(a) == strip_wall(b)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_diverged(self, tmp_path):
        report = run_experiment(tiny(tmp_path, problem="convection", constants={"beta": 1e200}))
        assert report.diverged and report.eval is None
        assert json.loads((tmp_path / "run" / "report.json").read_text())["status"] == "diverged"

    def test_navier_stokes(self, tmp_path):
        ref = manufactured_reference(5, 4, (0.0, 0.5, 1.0))
        path = tmp_path / "ref.csv"
        write_reference_csv(ref, path)
        cfg = tiny(tmp_path, problem="navier_stokes", reference_data=str(path), n_random=30)
        report = run_experiment(cfg)
        assert report.loss["initial_is_data"]
        grid = list(csv.reader((tmp_path / "run" / "prediction_grid.csv").open()))
        assert grid[0] == ["x", "y", "p_pred", "p_ref", "abs_err"] and len(grid) - 1 == 20
        with pytest.raises(ConfigError):
            run_experiment(tiny(tmp_path, problem="navier_stokes", reference_data=str(path), n_random=41))
        with pytest.raises(ConfigError):
            run_experiment(tiny(tmp_path, problem="navier_stokes", reference_data=str(tmp_path / "none.csv")))


def fake_report(root, name, problem, activation, rrmse, loss=0.1):
    d = root / name
    d.mkdir()
    doc = {"config": {"problem": problem, "activation": activation}, "loss": {"total": loss}, "eval": {"rmae": rrmse / 2, "rrmse": rrmse}, "wall_s": 1.5}
    (d / "report.json").write_text(json.dumps(doc))
    return d


class TestAggregate:
    def test_empty_is_header_only(self):
        assert aggregate([]).to_csv() == ",".join(AGGREGATE_COLUMNS) + "\n"

    def test_sorted_by_problem_then_rrmse(self, tmp_path):
        dirs = [
            fake_report(tmp_path, "a", "wave", "tanh", 0.2),
            fake_report(tmp_path, "b", "reaction", "tanh", 0.9),
            fake_report(tmp_path, "c", "reaction", "softgabortanh", 0.002),
            fake_report(tmp_path, "d", "wave", "softher2tanh", 0.02),
        ]
        res = aggregate(dirs)
        assert [(r["problem"], r["activation"]) for r in res.rows] == [
            ("reaction", "softgabortanh"),
            ("reaction", "tanh"),
            ("wave", "softher2tanh"),
            ("wave", "tanh"),
        ]
        lines = res.to_csv().splitlines()
        assert lines[0] == "problem,activation,loss,rmae,rrmse,wall_s" and len(lines) == 5

    def test_duplicates_kept_and_flagged(self, tmp_path):
        dirs = [fake_report(tmp_path, "a", "wave", "tanh", 0.2), fake_report(tmp_path, "b", "wave", "tanh", 0.3)]
        res = aggregate(dirs)
        assert len(res.rows) == 2 and all(r["duplicate"] for r in res.rows)
        assert res.duplicates == [("wave", "tanh")] and any("duplicate" in w for w in res.warnings)

    def test_malformed_skipped(self, tmp_path):
        good = fake_report(tmp_path, "a", "wave", "tanh", 0.2)
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "report.json").write_text("{not json")
        res = aggregate([good, bad, tmp_path / "missing"])
        assert len(res.rows) == 1 and len(res.warnings) == 2

    def test_diverged_sorts_last(self, tmp_path):
        d = tmp_path / "x"
        d.mkdir()
        (d / "report.json").write_text(json.dumps({"config": {"problem": "wave", "activation": "softmextanh"}, "loss": None, "eval": None, "wall_s": 2.0}))
        res = aggregate([d, fake_report(tmp_path, "a", "wave", "tanh", 0.2)])
        assert res.rows[-1]["activation"] == "softmextanh" and math.isnan(res.rows[-1]["rrmse"])


class TestCli:
    def test_train_flags_and_evaluate(self, tmp_path, capsys):
        out = tmp_path / "r"
        code = cli.main(["train", "--problem", "reaction", "--activation", "softgabortanh", "--seed", "5", "--hidden-layers", "1", "--hidden-width", "4", "--iterations", "2", "--nx", "4", "--nt", "4", "--eval-nx", "5", "--eval-nt", "5", "--output-dir", str(out)])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["status"] == "max_iters"
        assert cli.main(["evaluate", "--checkpoint", str(out / "model.json"), "--problem", "reaction", "--eval-nx", "5", "--eval-nt", "5"]) == 0
        assert json.loads(capsys.readouterr().out) == summary["eval"]

    def test_train_config_file_with_overrides(self, tmp_path, capsys):
        cfg = tiny(tmp_path, "fromfile", problem="convection", activation="softgabortanhw")
        path = tmp_path / "run.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert cli.main(["train", "--config", str(path), "--constant", "beta=10", "--iterations", "1"]) == 0
        doc = json.loads((tmp_path / "fromfile" / "report.json").read_text())
        assert doc["config"]["constants"] == {"beta": 10.0} and doc["config"]["iterations"] == 1
        capsys.readouterr()

    def test_unknown_activation_exit_2(self, capsys):
        assert cli.main(["train", "--activation", "relu"]) == 2
        err = capsys.readouterr().err
        assert "usage:" in err and "relu" in err

    def test_unknown_flag_exit_2(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["train", "--learning-rate", "3"])
        assert info.value.code == 2
        assert "usage:" in capsys.readouterr().err

    def test_bad_constant(self, capsys):
        assert cli.main(["train", "--problem", "wave", "--constant", "rho=1", "--iterations", "1", "--hidden-width", "2", "--hidden-layers", "1"]) == 2
        with pytest.raises(SystemExit):
            cli.main(["train", "--constant", "beta"])
        capsys.readouterr()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exit_3(self, tmp_path, capsys):
        code = cli.main(["train", "--problem", "convection", "--constant", "beta=1e200", "--hidden-layers", "1", "--hidden-width", "2", "--nx", "3", "--nt", "3", "--output-dir", str(tmp_path / "d")])
        assert code == 3
        capsys.readouterr()

    def test_evaluate_bad_checkpoint(self, tmp_path, capsys):
        assert cli.main(["evaluate", "--checkpoint", str(tmp_path / "none.json"), "--problem", "wave"]) == 2
        capsys.readouterr()

    def test_aggregate_stdout_and_file(self, tmp_path, capsys):
        a = fake_report(tmp_path, "a", "wave", "tanh", 0.2)
        assert cli.main(["aggregate", str(a), str(tmp_path / "missing")]) == 0
        cap = capsys.readouterr()
        assert cap.out.splitlines()[0] == ",".join(AGGREGATE_COLUMNS) and "warning" in cap.err
        target = tmp_path / "table.csv"
        assert cli.main(["aggregate", str(a), "-o", str(target)]) == 0
        assert target.read_text() == cap.out
