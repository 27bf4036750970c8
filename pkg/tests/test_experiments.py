import json
import math

import numpy as np
import pytest
from django.core.exceptions import ValidationError

from cmdp_toolkit.exceptions import RateFitError, SlaterConditionError
from cmdp_toolkit.experiments import (
    BISECTION_COLUMNS,
    ExperimentConfig,
    dual_trace_columns,
    fit_rate,
    load_config,
    load_instance,
    read_trace_csv,
    run_experiment,
    write_trace_csv,
)
from cmdp_toolkit.formats import dump_policy
from cmdp_toolkit.invariants import conflict_model
from cmdp_toolkit.models import DecisionRule, Policy

from . import presets
from .utils import bandit_model, write_config, write_model


RANDOM_INSTANCE = {
    "generator": "random",
    "seed": 5,
    "num_states": 3,
    "num_actions": 2,
    "n_constraints": 1,
    "gamma": 0.8,
}


def dual_config(run_dir, **overrides):
    data = {
        "solver": "dual",
        "instance": RANDOM_INSTANCE,
        "tau": 0.5,
        "outer_iterations": 5,
        "inner_budget": 20,
        "recover_budget": 40,
        "step_size": "practical",
        "output_dir": str(run_dir / "dual"),
    }
    data.update(overrides)
    return data


class TestExperimentConfig:
    def test_minimal(self, tmp_path):
        config = ExperimentConfig.from_dict(dual_config(tmp_path))
        assert config.solver_kind == "dual"
        assert config.run_dir == tmp_path / "dual"
        assert "base_dir" not in config.as_dict()

    @pytest.mark.parametrize(
        "alias, kind", [("dual-descent", "dual"), ("bisection", "bisect"), ("standard-cmdp", "standard")]
    )
    def test_solver_aliases(self, tmp_path, alias, kind):
        config = ExperimentConfig.from_dict(dual_config(tmp_path, solver=alias, epsilon=0.1))
        assert config.solver_kind == kind

    def test_unknown_keys(self, tmp_path):
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(dual_config(tmp_path, colour="blue"))
        assert exc.value.message_dict == {"colour": ["unknown config key"]}

    def test_missing_keys(self):
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict({"tau": 0.1})
        assert set(exc.value.message_dict) == {"solver", "instance"}

    def test_not_an_object(self):
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict([])

    def test_all_errors_reported(self, tmp_path):
        data = dual_config(
            tmp_path,
            solver="simplex",
            tau=-1.0,
            inner_budget=0,
            step_size="huge",
            initialization="gaussian",
            interval=[2.0, 1.0],
        )
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(data)
        assert set(exc.value.message_dict) == {
            "solver",
            "tau",
            "inner_budget",
            "step_size",
            "initialization",
            "interval",
        }

    def test_regularized_runs_need_tau(self, tmp_path):
        data = dual_config(tmp_path)
        del data["tau"]
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(data)
        assert "tau" in exc.value.message_dict

    def test_dual_needs_horizon_or_epsilon(self, tmp_path):
        data = dual_config(tmp_path)
        del data["outer_iterations"]
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(data)
        assert "outer_iterations" in exc.value.message_dict
        ExperimentConfig.from_dict(dict(data, epsilon=0.1))

    def test_bisection_needs_epsilon(self, tmp_path):
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(dual_config(tmp_path, solver="bisect"))
        assert "epsilon" in exc.value.message_dict

    @pytest.mark.parametrize(
        "instance",
        [
            "model.json",
            {},
            {"generator": "maze"},
            {"generator": "gridworld", "width": 3},
        ],
    )
    def test_invalid_instance(self, tmp_path, instance):
        with pytest.raises(ValidationError) as exc:
            ExperimentConfig.from_dict(dual_config(tmp_path, instance=instance))
        assert "instance" in exc.value.message_dict

    def test_default_run_dir(self, cmdp_settings, tmp_path):
        cmdp_settings.update({"OUTPUT_DIR": str(tmp_path)})
        data = dual_config(tmp_path)
        del data["output_dir"]
        assert ExperimentConfig.from_dict(data).run_dir == tmp_path / "dual"
        assert ExperimentConfig.from_dict(dict(data, name="first")).run_dir == tmp_path / "first"

    def test_load_config_resolves_relative_paths(self, tmp_path):
        write_model(tmp_path / "model.json", bandit_model(thresholds=[0.5]))
        path = write_config(
            tmp_path / "experiment.json",
            {
                "solver": "bisect",
                "instance": {"file": "model.json"},
                "tau": 0.5,
                "epsilon": 0.01,
                "output_dir": "out",
            },
        )
        config = load_config(path)
        assert config.run_dir == tmp_path / "out"
        model, slater = load_instance(config)
        assert model.num_constraints == 1
        assert slater.prob.tolist() == [[0.5, 0.5]]


class TestLoadInstance:
    def test_random(self, tmp_path):
        model, slater = load_instance(ExperimentConfig.from_dict(dual_config(tmp_path)))
        assert model.shape == (3, 2)
        assert isinstance(slater, Policy)

    def test_gridworld(self, tmp_path):
        instance = {"generator": "gridworld", "width": 3, "height": 2, "gamma": 0.9, "hazards": [[1, 1]]}
        model, _ = load_instance(ExperimentConfig.from_dict(dual_config(tmp_path, instance=instance)))
        assert model.shape == (6, 4)

    def test_file_with_slater_policy(self, tmp_path):
        write_model(tmp_path / "model.json", bandit_model(thresholds=[0.5]))
        dump_policy(DecisionRule([[0.2, 0.8]]), tmp_path / "slater.json")
        instance = {"file": "model.json", "slater_policy": "slater.json"}
        config = ExperimentConfig.from_dict(dual_config(tmp_path, instance=instance), base_dir=tmp_path)
        _, slater = load_instance(config)
        assert slater.prob.tolist() == [[0.2, 0.8]]


class TestTraceCsv:
    def test_round_trip_precision(self, tmp_path):
        rows = [
            {"iter": 0, "value": 1.0 / 3.0, "error": ""},
            {"iter": 1, "value": np.float64(0.1), "error": 2.5},
        ]
        path = write_trace_csv(tmp_path / "trace.csv", rows, ["iter", "value", "error"])
        assert path.read_text().splitlines() == [
            "iter,value,error",
            "0,0.3333333333333333,",
            "1,0.1,2.5",
        ]
        assert read_trace_csv(path) == [
            {"iter": 0, "value": 1.0 / 3.0, "error": None},
            {"iter": 1, "value": 0.1, "error": 2.5},
        ]

    def test_empty_trace(self, tmp_path):
        path = write_trace_csv(tmp_path / "trace.csv", [], BISECTION_COLUMNS)
        assert path.read_text() == ",".join(BISECTION_COLUMNS) + "\n"
        assert read_trace_csv(path) == []

    def test_dual_columns(self):
        assert dual_trace_columns(2)[:3] == ["iter", "lambda_0", "lambda_1"]
        assert dual_trace_columns(2)[-1] == "wall_ms"


class TestRunExperiment:
    def test_dual_run_artifacts(self, tmp_path):
        run_dir = run_experiment(dual_config(tmp_path))
        artifacts = sorted(p.name for p in run_dir.iterdir())
        assert artifacts == ["params.json", "policy.json", "summary.json", "trace.csv"]
        rows = read_trace_csv(run_dir / "trace.csv")
        assert len(rows) == 5
        assert list(rows[0]) == dual_trace_columns(1)
        assert all(row["wall_ms"] == 0.0 for row in rows)
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["solver"] == "dual"
        assert summary["wall_ms"] == 0.0
        assert len(summary["multiplier"]) == 1
        params = json.loads((run_dir / "params.json").read_text())
        assert params["outer_iterations"] == 5
        assert params["inner_budget"] == 20
        assert params["config"]["tau"] == 0.5
        assert params["model"]["num_states"] == 3

    def test_reruns_are_byte_identical(self, tmp_path):
        first = run_experiment(dual_config(tmp_path, output_dir=str(tmp_path / "a")))
        second = run_experiment(dual_config(tmp_path, output_dir=str(tmp_path / "b")))
        for name in ("trace.csv", "summary.json", "policy.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    @pytest.mark.cmdp_settings(presets.RANDOM_DUAL_INIT)
    def test_random_initialization(self, cmdp_settings, tmp_path):
        run_dir = run_experiment(dual_config(tmp_path, initialization="random", init_seed=3))
        params = json.loads((run_dir / "params.json").read_text())
        assert params["initial_multiplier"][0] > 0

    def test_dual_with_oracle(self, tmp_path):
        run_dir = run_experiment(dual_config(tmp_path, oracle=True, oracle_resolution=1e-2))
        summary = json.loads((run_dir / "summary.json").read_text())
        assert len(summary["oracle"]["lambda_star"]) == 1
        assert "dual_gap" in summary["oracle"]

    def test_dual_rejects_unconstrained_instances(self, tmp_path):
        instance = dict(RANDOM_INSTANCE, n_constraints=0)
        with pytest.raises(ValidationError):
            run_experiment(dual_config(tmp_path, instance=instance))

    def test_bisection_run(self, tmp_path):
        data = dual_config(tmp_path, solver="bisect", epsilon=1e-3, output_dir=str(tmp_path / "bisect"))
        run_dir = run_experiment(data)
        rows = read_trace_csv(run_dir / "trace.csv")
        summary = json.loads((run_dir / "summary.json").read_text())
        assert len(rows) == summary["outer_iterations"]
        if rows:
            assert list(rows[0]) == BISECTION_COLUMNS
        assert len(summary["final_interval"]) == 2

    def test_bisection_rejects_two_constraints(self, tmp_path):
        instance = dict(RANDOM_INSTANCE, n_constraints=2)
        with pytest.raises(ValidationError) as exc:
            run_experiment(dual_config(tmp_path, solver="bisect", epsilon=1e-3, instance=instance))
        assert exc.value.message_dict == {"solver": ["bisection requires exactly one constraint"]}

    def test_standard_run(self, tmp_path):
        write_model(tmp_path / "model.json", bandit_model(thresholds=[0.8]))
        data = {
            "solver": "standard",
            "instance": {"file": str(tmp_path / "model.json")},
            "epsilon": 0.2,
            "outer_iterations": 20,
            "oracle": True,
            "output_dir": str(tmp_path / "standard"),
        }
        run_dir = run_experiment(data)
        rows = read_trace_csv(run_dir / "trace.csv")
        summary = json.loads((run_dir / "summary.json").read_text())
        assert len(rows) == summary["report"]["outer_iterations"] <= 20
        assert summary["oracle"]["lp_value"] == pytest.approx(1.2)

    def test_infeasible_slater_policy(self, tmp_path):
        model, _ = conflict_model(np.random.default_rng(0), 3)
        write_model(tmp_path / "model.json", model)
        dump_policy(DecisionRule.deterministic([0, 0, 0], 2), tmp_path / "greedy.json")
        instance = {"file": "model.json", "slater_policy": "greedy.json"}
        config = ExperimentConfig.from_dict(dual_config(tmp_path, instance=instance), base_dir=tmp_path)
        with pytest.raises(SlaterConditionError):
            run_experiment(config)

    def test_wall_clock(self, tmp_path):
        run_dir = run_experiment(dual_config(tmp_path, record_wall_clock=True))
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["wall_ms"] > 0


class TestFitRate:
    def test_power_law(self):
        rows = [{"iter": t, "gap": 3.0 * t**-2.0} for t in range(1, 21)]
        fit = fit_rate(rows, "gap")
        assert fit.slope == pytest.approx(-2.0)
        assert fit.intercept == pytest.approx(math.log(3.0))
        assert fit.residual == pytest.approx(0.0, abs=1e-12)
        assert fit.rows == 20
        assert fit.band[0] <= fit.slope <= fit.band[1]

    def test_linear_log(self):
        rows = [{"iter": t, "error": 0.9**t} for t in range(0, 30)]
        fit = fit_rate(rows, "error", model="linear-log")
        assert fit.slope == pytest.approx(math.log(0.9))

    def test_skips_non_positive_rows(self):
        rows = [{"iter": t, "gap": 1.0 / t} for t in range(1, 13)]
        rows += [{"iter": 13, "gap": 0.0}, {"iter": 14, "gap": None}, {"iter": 0, "gap": 5.0}]
        assert fit_rate(rows, "gap").rows == 12

    def test_constant_zero_column(self):
        rows = [{"iter": t, "gap": 0.0} for t in range(1, 20)]
        with pytest.raises(RateFitError) as exc:
            fit_rate(rows, "gap")
        assert "constant zero" in str(exc.value)

    def test_too_few_rows(self):
        rows = [{"iter": t, "gap": 1.0 / t} for t in range(1, 5)]
        with pytest.raises(RateFitError):
            fit_rate(rows, "gap")

    @pytest.mark.cmdp_settings(presets.FEW_FIT_ROWS)
    def test_min_rows_setting(self, cmdp_settings):
        rows = [{"iter": t, "gap": 1.0 / t} for t in range(1, 5)]
        assert fit_rate(rows, "gap").slope == pytest.approx(-1.0)

    def test_unknown_column_and_model(self):
        rows = [{"iter": 1, "gap": 1.0}]
        with pytest.raises(RateFitError):
            fit_rate(rows, "error")
        with pytest.raises(RateFitError):
            fit_rate(rows, "gap", model="cubic")

    def test_from_trace_file(self, tmp_path):
        rows = [{"iter": t, "gap": 2.0 / t} for t in range(1, 16)]
        path = write_trace_csv(tmp_path / "trace.csv", rows, ["iter", "gap"])
        assert fit_rate(path, "gap").slope == pytest.approx(-1.0)
        assert fit_rate(str(path), "gap").rows == 15
