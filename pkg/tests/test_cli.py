import csv
import json
import math

import numpy as np
import pytest

from sqtransfer.cli import (
    ConfigError,
    Experiment,
    ExperimentConfig,
    UnconvergedCutoffError,
    config_from_dict,
    converge_cutoff,
    main,
    parse_config,
    run_fidelity_maps,
    run_stability,
    run_sweep_q,
    run_sweep_r,
    run_time_evolution,
    run_wigner,
)
from sqtransfer.cli.output import format_cell
from sqtransfer.model import SqueezedBathParams, fig4_params
from sqtransfer.operators import HilbertSpec


def cfg_from(text):
    return config_from_dict(parse_config(text))


class TestConfigGrammar:
    def test_values(self):
        flat = parse_config(
            """
            # comment line
            experiment = sweep-q
            params.g_ac = 100          # trailing comment
            sweep.q = 0.0:0.04:5
            sweep.g_cm = 0.001, 0.005,0.01
            bath.theta = pi
            params.include_K = true
            spec.converge = false
            """
        )
        np.testing.assert_allclose(flat["sweep.q"], [0, 0.01, 0.02, 0.03, 0.04])
        assert flat["sweep.g_cm"] == [0.001, 0.005, 0.01]
        assert flat["bath.theta"] == pytest.approx(math.pi)
        assert flat["params.include_K"] is True and flat["spec.converge"] is False
        assert flat["experiment"] == "sweep-q"

    def test_multiple_of_pi(self):
        assert parse_config("bath.theta = 0.5*pi")["bath.theta"] == pytest.approx(math.pi / 2)

    @pytest.mark.parametrize(
        "text",
        [
            "params.g_ac 100",
            "params.g_ac = 1\nparams.g_ac = 2",
            "1bad = 3",
            "sweep.q = 0:1:1",
            "sweep.q = 0:1:2.5",
            "sweep.q = a:1:3",
        ],
    )
    def test_syntax_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    @pytest.mark.parametrize(
        "text",
        [
            "params.nope = 1",
            "sweep.kappa_a = 0.1, 0.2",
            "experiment = plot",
            "solver.method = cholesky",
            "params.q = -1",
            "whatever = 3",
            "sweep.q = 0, inf",
        ],
    )
    def test_semantic_errors(self, text):
        with pytest.raises(ConfigError):
            cfg_from(text)

    def test_typed_config(self):
        cfg = cfg_from(
            "experiment = sweep-r\nbath.r = 0.3\nspec.cavity_dim = 6\nspec.mech_dim = 8\n"
            "converge.tol = 1e-5\nconverge.cap = 20\nsolver.method = direct\nevolve.n_samples = 11"
        )
        assert cfg.experiment is Experiment.SWEEP_R
        assert cfg.bath == SqueezedBathParams(r=0.3)
        assert cfg.spec == HilbertSpec(6, 8)
        assert (cfg.cutoff_tol, cfg.cutoff_cap, cfg.n_samples) == (1e-5, 20, 11)
        assert cfg.solver.method.value == "direct"
        echo = cfg.echo()
        assert echo["spec"] == {"cavity_dim": 6, "mech_dim": 8}
        json.dumps(echo)


class TestOutputFormat:
    @pytest.mark.parametrize(
        "value,text",
        [(0.1, "1.000000000000e-01"), (-2.5e-7, "-2.500000000000e-07"), (3, "3"), (True, "true"), ("8x8", "8x8"), (math.nan, "nan")],
    )
    def test_cells(self, value, text):
        assert format_cell(value) == text

    def test_significant_digits(self):
        x = 0.21023607550582155
        assert float(format_cell(x)) == pytest.approx(x, rel=1e-11)


@pytest.fixture
def small():
    return cfg_from("spec.cavity_dim = 4\nspec.mech_dim = 4")


class TestSweeps:
    def test_sweep_q_rows(self, small):
        small.sweeps = {"q": np.array([0.0, 0.01]), "g_cm": np.array([0.01, 0.001])}
        table = run_sweep_q(small)
        assert table.columns[:8] == ["q", "g_cm", "var_ya_num", "var_yb_num", "var_ya_ana", "var_yb_ana", "residual", "cutoff_used"]
        rows = table.records()
        assert [(r["q"], r["g_cm"]) for r in rows] == [(0.0, 0.01), (0.01, 0.01), (0.0, 0.001), (0.01, 0.001)]
        for key in ("var_ya_num", "var_yb_num", "var_ya_ana", "var_yb_ana"):
            assert rows[0][key] == pytest.approx(0.25, abs=1e-10)
        assert (rows[1]["var_ya_ana"], rows[1]["var_yb_ana"]) == pytest.approx((0.21024, 0.20126), abs=1e-4)
        assert rows[1]["flag"] == "ok" and rows[1]["cutoff_used"] == "4x4"
        # J = 0.1 puts q = 0.01 beyond the semiclassical threshold
        assert rows[3]["flag"] == "unstable"
        assert all(r["residual"] <= 1e-10 for r in rows)

    def test_sweep_r(self, small):
        small.spec = HilbertSpec(6, 6)  # r = 0.5 needs more than four phonons
        small.params = fig4_params()
        small.bath = SqueezedBathParams(r=0.3)
        small.sweeps = {"r": np.array([0.0, 0.25, 0.5])}
        rows = run_sweep_r(small).records()
        for key in ("var_xa_num", "var_xb_num", "var_xa_ana", "var_xb_ana"):
            assert rows[0][key] == pytest.approx(0.25, abs=1e-10)
            assert rows[0][key] > rows[1][key] > rows[2][key]

    def test_sweep_r_analytic_point(self, small):
        small.params = fig4_params()
        small.sweeps = {"r": np.array([0.3])}
        row = run_sweep_r(small).records()[0]
        assert (row["var_xa_ana"], row["var_xb_ana"]) == pytest.approx((0.202471, 0.184731), abs=1e-6)

    def test_fidelity_map_vacuum_limit(self, small):
        small.experiment = Experiment.FIDELITY_MAP_Q_GCM
        small.sweeps = {"q": np.array([1e-7]), "g_cm": np.array([0.01])}
        row = run_fidelity_maps(small).records()[0]
        assert row["fidelity"] == pytest.approx(1.0, abs=1e-6)

    def test_fidelity_map_bath_increases(self, small):
        small.experiment = Experiment.FIDELITY_MAP_GAC_GCM
        small.params = fig4_params()
        small.bath = SqueezedBathParams(r=0.3)
        small.sweeps = {"g_ac": np.array([50.0, 100.0]), "g_cm": np.array([0.005, 0.01])}
        table = run_fidelity_maps(small)
        assert table.columns[:3] == ["g_ac", "g_cm", "fidelity"]
        F = np.array(table.column("fidelity")).reshape(2, 2)
        assert F[0, 0] < F[0, 1] and F[1, 0] < F[1, 1]
        assert F[0, 0] < F[1, 0] and F[0, 1] < F[1, 1]

    def test_stability_table(self):
        cfg = ExperimentConfig()
        cfg.sweeps = {"q": np.array([0.0, 0.06])}
        rows = run_stability(cfg).records()
        assert rows[0]["is_stable"] and rows[0]["closed_form_stable"]
        assert not rows[1]["is_stable"] and not rows[1]["closed_form_stable"]
        assert rows[0]["threshold"] == pytest.approx(0.0505, abs=1e-10)
        assert len(rows[0]["eigenvalues"].split(";")) == 10

    def test_time_evolution(self):
        cfg = cfg_from("spec.cavity_dim = 3\nspec.mech_dim = 3\nevolve.t_final = 20\nevolve.n_samples = 3")
        table = run_time_evolution(cfg)
        assert table.columns == ["t", "var_ya", "var_yb", "trace"]
        first = table.rows[0]
        assert first[1] == pytest.approx(0.25) and first[2] == pytest.approx(0.25)
        assert table.meta["max_trace_error"] <= 10 * cfg.atol
        assert "trace_distance_to_final" in table.meta["steady_state"]

    def test_wigner_grid(self):
        cfg = cfg_from("spec.cavity_dim = 3\nspec.mech_dim = 3\nwigner.points = 5\nwigner.extent = 2")
        table = run_wigner(cfg)
        assert len(table.rows) == 25
        centre = table.records()[12]
        assert (centre["x"], centre["y"]) == (0.0, 0.0)
        assert centre["w_cavity"] > 0


class TestConvergeCutoff:
    def test_vacuum_is_minimal(self):
        cfg = ExperimentConfig(params=ExperimentConfig().params.with_(q=0.0))
        conv = converge_cutoff(cfg)
        assert (conv.spec.cavity_dim, conv.spec.mech_dim) == (2, 2)
        assert len(conv.trail) == 2

    def test_pumped_trail_shrinks(self):
        cfg = ExperimentConfig(params=ExperimentConfig().params.with_(q=0.005))
        conv = converge_cutoff(cfg)
        deltas = [step["delta"] for step in conv.trail[1:]]
        assert deltas[-1] < cfg.cutoff_tol
        assert all(b < a for a, b in zip(deltas, deltas[1:]))
        assert conv.state_spec.cavity_dim == conv.spec.cavity_dim + 2

    def test_cap_exceeded(self):
        cfg = ExperimentConfig(cutoff_cap=4)
        with pytest.raises(UnconvergedCutoffError) as info:
            converge_cutoff(cfg)
        assert [s["cavity_dim"] for s in info.value.trail] == [2, 4]


class TestMain:
    def write_config(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text, encoding="utf-8")
        return path

    def test_csv_and_sidecar(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, "sweep.q = 0:0.01:2\nspec.cavity_dim = 3\nspec.mech_dim = 3\n")
        out = tmp_path / "sq.csv"
        assert main(["sweep-q", "--config", str(cfg), "--out", str(out), "--seed", "42"]) == 0
        with out.open(encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:2] == ["q", "g_cm"] and len(rows) == 3
        assert "e" in rows[2][2] and len(rows[2][2].split("e")[0].replace("-", "").replace(".", "")) >= 10
        meta = json.loads((tmp_path / "sq.json").read_text(encoding="utf-8"))
        assert meta["schema_version"] == 1
        assert meta["config"]["spec"] == {"cavity_dim": 3, "mech_dim": 3}
        assert meta["wall_time_s"] > 0 and meta["max_residual"] <= 1e-10
        assert [p["cutoff_used"] for p in meta["points"]] == ["3x3", "3x3"]

    def test_deterministic_and_thread_independent(self, tmp_path):
        cfg = self.write_config(tmp_path, "sweep.q = 0.002, 0.01, 0.005\nspec.cavity_dim = 3\nspec.mech_dim = 3\n")
        outputs = []
        for name, threads in [("a", 1), ("b", 1), ("c", 2)]:
            out = tmp_path / f"{name}.csv"
            assert main(["sweep-q", "--config", str(cfg), "--out", str(out), "--threads", str(threads)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_fidelity_map_kind_from_config(self, tmp_path):
        cfg = self.write_config(
            tmp_path, "bath.r = 0.3\nparams.q = 0\nparams.kappa_b = 0.2\nsweep.g_ac = 100\nsweep.g_cm = 0.01\n"
            "spec.cavity_dim = 3\nspec.mech_dim = 3\n"
        )
        out = tmp_path / "fm.csv"
        assert main(["fidelity-map", "--config", str(cfg), "--out", str(out)]) == 0
        assert out.read_text(encoding="utf-8").startswith("g_ac,g_cm,fidelity")

    def test_stability_defaults(self, tmp_path):
        out = tmp_path / "st.csv"
        assert main(["stability", "--out", str(out)]) == 0
        meta = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
        assert meta["threshold"] == pytest.approx(0.0505, abs=1e-10)

    @pytest.mark.parametrize(
        "args,text",
        [(["sweep-q"], "experiment = sweep-r\n"), (["sweep-q"], "params.q = oops\n"), (["sweep-q", "--threads", "0"], "")],
    )
    def test_bad_input_exit_code(self, tmp_path, args, text):
        cfg = self.write_config(tmp_path, text)
        assert main(args + ["--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["stability", "--config", str(tmp_path / "absent.cfg")]) == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["plot"])


@pytest.mark.parametrize("path", sorted((__import__("pathlib").Path(__file__).parent.parent / "configs").glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    from sqtransfer.cli import load_config

    cfg = load_config(path)
    assert cfg.experiment is not None
