import json
from pathlib import Path

import numpy as np
import pytest

from kolmonet.ann import load_network, realize, save_network
from kolmonet.builders import Payoff
from kolmonet.cli import main
from kolmonet.config import (
    ConfigError,
    measure_from_config,
    model_from_config,
    parse_config,
    payoff_from_config,
)
from kolmonet.sde import BlackScholesModel
from kolmonet.sweep import records_from_csv

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"

D1 = """seed = 7
d = 1
epsilon = 0.01
payoff = basket_call
alpha = 0.02
beta = 0.2
strike = 0.5
"""


class TestParse:
    def test_values_and_comments(self):
        cfg = parse_config("# header\nseed = 3  # trailing\n\neps_list = 0.1, 0.2\n")
        assert cfg.get_int("seed") == 3
        assert cfg.get_list("eps_list") == [0.1, 0.2]

    def test_unknown_key_line(self):
        with pytest.raises(ConfigError, match="line 2: unknown key 'foo'"):
            parse_config("seed = 1\nfoo = 2\n")

    def test_duplicate(self):
        with pytest.raises(ConfigError, match="line 2: duplicate key 'seed'"):
            parse_config("seed = 1\nseed = 2\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("seed 1\n")

    def test_empty_value(self):
        with pytest.raises(ConfigError, match="empty value"):
            parse_config("payoff =\n")

    def test_bad_number_names_line(self):
        cfg = parse_config("seed = 1\nd = two\n")
        with pytest.raises(ConfigError, match="line 2: 'd' expects a number"):
            cfg.get_int("d")

    def test_override_unknown(self):
        with pytest.raises(ConfigError, match="--bogus"):
            parse_config("").override({"bogus": "1"})

    def test_shipped_configs_parse(self):
        for path in CONFIGS.glob("*.cfg"):
            parse_config(path.read_text())


class TestDomain:
    def test_model_defaults(self):
        m = model_from_config(parse_config(""), 3)
        assert np.array_equal(m.alpha, np.zeros(3)) and np.array_equal(m.beta, np.full(3, 0.2))

    def test_constant_correlation(self):
        m = model_from_config(parse_config("correlation = constant:0.4\n"), 3)
        assert np.allclose(m.B @ m.B.T, 0.6 * np.eye(3) + 0.4)

    def test_correlation_file(self, tmp_path):
        path = tmp_path / "corr.txt"
        np.savetxt(path, [[1.0, 0.5], [0.5, 1.0]])
        m = model_from_config(parse_config(f"correlation = {path}\n"), 2)
        assert np.allclose(m.B @ m.B.T, [[1.0, 0.5], [0.5, 1.0]])

    def test_correlation_wrong_shape(self, tmp_path):
        path = tmp_path / "corr.txt"
        np.savetxt(path, np.eye(3))
        with pytest.raises(ConfigError, match="shape"):
            model_from_config(parse_config(f"correlation = {path}\n"), 2)

    def test_vector_length(self):
        with pytest.raises(ConfigError, match="'beta' has 2 entries"):
            model_from_config(parse_config("beta = 0.1, 0.2\n"), 3)

    def test_payoff_required(self):
        with pytest.raises(ConfigError, match="missing required key 'payoff'"):
            payoff_from_config(parse_config(""), 2)

    def test_payoff_equal_weights(self):
        pay = payoff_from_config(parse_config("payoff = call_on_min\nstrike = 0.2\n"), 4)
        assert np.allclose(pay.weights, 0.25) and pay.strike == 0.2

    def test_unknown_payoff(self):
        with pytest.raises(ConfigError, match="unknown payoff"):
            payoff_from_config(parse_config("payoff = digital\n"), 1)

    def test_measures(self, tmp_path):
        model = BlackScholesModel.independent(2, 0.0, 0.2)
        assert measure_from_config(parse_config(""), 2, model, 1.0).kind == "uniform_box"
        assert measure_from_config(parse_config("measure = lognormal\n"), 2, model, 1.0).kind == \
            "pushforward_lognormal"
        pts = tmp_path / "pts.txt"
        np.savetxt(pts, [[0.1, 0.2], [0.3, 0.4]])
        spec = measure_from_config(parse_config(f"measure = points:{pts}\n"), 2, model, 1.0)
        assert spec.kind == "point_cloud" and spec.params["points"].shape == (2, 2)
        with pytest.raises(ConfigError):
            measure_from_config(parse_config("measure = gaussian\n"), 2, model, 1.0)
        with pytest.raises(ConfigError):
            measure_from_config(parse_config("measure = uniform:1:0\n"), 2, model, 1.0)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "d1.cfg").write_text(D1)
    return tmp_path


class TestBuild:
    def test_d1_build(self, workdir, capsys):
        assert main(["build", "--config", "d1.cfg", "--out", "psi.ann"]) == 0
        out = capsys.readouterr().out
        rec = records_from_csv(out)[0]
        assert rec.success and rec.measured_lp_error <= 0.01
        assert load_network(workdir / "psi.ann").input_dim == 1

    def test_forced_failure(self, workdir, capsys):
        code = main(["build", "--config", "d1.cfg", "--epsilon", "1e-9", "--max_attempts", "1",
                     "--n_max", "64", "--out", "f.ann"])
        captured = capsys.readouterr()
        assert code != 0
        rec = records_from_csv(captured.out)[0]
        assert not rec.success and rec.measured_lp_error > 1e-9
        assert "not reached" in captured.err

    def test_missing_payoff(self, workdir, capsys):
        code = main(["build", "--seed", "1", "--d", "1", "--epsilon", "0.1"])
        assert code == 2
        assert "missing required key 'payoff'" in capsys.readouterr().err

    def test_missing_seed(self, workdir, capsys):
        assert main(["build", "--d", "1", "--epsilon", "0.1", "--payoff", "basket_call"]) == 2
        assert "'seed'" in capsys.readouterr().err

    def test_parse_error_line(self, workdir, capsys):
        (workdir / "bad.cfg").write_text("seed = 1\nd = 2\nfoo = 3\n")
        assert main(["build", "--config", "bad.cfg"]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_theory_mode_not_built(self, workdir, capsys):
        assert main(["build", "--config", "d1.cfg", "--mode", "theory"]) != 0
        captured = capsys.readouterr()
        assert "exceeds cap" in captured.err and "theory: C=" in captured.err
        assert records_from_csv(captured.out)[0].n_used is None


class TestPrice:
    def test_payoff_net_is_payoff(self, workdir, capsys):
        pay = Payoff("call_on_max", [0.3, 0.9], 0.2)
        save_network(pay.network(), "phi.ann")
        assert main(["price", "--network", "phi.ann", "--x", "0.5,1.0"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(pay(np.array([0.5, 1.0])), abs=1e-15)

    def test_oracle_only(self, workdir, capsys):
        assert main(["price", "--config", "d1.cfg", "--x", "0.7"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.2159174744623524, rel=1e-12)

    def test_both_within_eps(self, workdir, capsys):
        assert main(["build", "--config", "d1.cfg", "--out", "psi.ann"]) == 0
        capsys.readouterr()
        diffs = []
        for x in np.random.default_rng(0).uniform(0, 1, 10):
            assert main(["price", "--config", "d1.cfg", "--network", "psi.ann", "--both", "--x", repr(float(x))]) == 0
            fields = dict(kv.split("=") for kv in capsys.readouterr().out.split())
            diffs.append(float(fields["difference"]))
        assert np.sqrt(np.mean(np.square(diffs))) <= 0.01 * 3

    def test_wrong_dimension(self, workdir, capsys):
        save_network(Payoff("basket_call", [1.0], 0.5).network(), "phi.ann")
        assert main(["price", "--network", "phi.ann", "--x", "0.5,1.0"]) == 2
        assert "dimension" in capsys.readouterr().err

    def test_missing_file(self, workdir, capsys):
        assert main(["price", "--network", "nope.ann", "--x", "1"]) == 2


class TestSweep:
    def test_single_cell_warns(self, workdir, capsys):
        assert main(["sweep", "--config", "d1.cfg", "--out", "one.csv"]) == 0
        assert "no scaling fit" in capsys.readouterr().out
        assert len(records_from_csv((workdir / "one.csv").read_text())) == 1

    def test_dimension_cells_satisfy_bounds(self, workdir, capsys):
        code = main(["sweep", "--config", "d1.cfg", "--d_list", "1,2,4,8", "--epsilon", "0.05",
                     "--oracle_samples", "20000", "--out", "dims.csv"])
        assert code == 0
        records = records_from_csv((workdir / "dims.csv").read_text())
        assert [r.d for r in records] == [1, 2, 4, 8]
        for r in records:
            assert r.phi_param_count == r.d + 3
            assert r.param_count <= r.n_used**2 * (r.d + 3)
            assert r.nonzero_param_count <= r.n_used * (r.d + 3)
        out = capsys.readouterr().out
        assert "d-exponent" in out and "predicted 3.5" in out

    def test_deterministic_modulo_wall_time(self, workdir):
        args = ["sweep", "--config", "d1.cfg", "--eps_list", "0.2,0.1", "--replicates", "2"]
        main(args + ["--out", "a.csv"])
        main(args + ["--out", "b.csv", "--workers", "2"])

        def strip(name):
            recs = records_from_csv((workdir / name).read_text())
            for r in recs:
                r.wall_time_seconds = 0.0
            return recs

        assert strip("a.csv") == strip("b.csv")

    @pytest.mark.slow
    def test_convergence_exponent(self, workdir, capsys):
        assert main(["sweep", "--config", str(CONFIGS / "convergence_d1.cfg"), "--out", "conv.csv"]) == 0
        out = capsys.readouterr().out
        line = next(ln for ln in out.splitlines() if "eps-exponent" in ln and "predicted 2" in ln)
        assert 1.5 <= float(line.split("=")[1].split()[0]) <= 2.5


class TestVerify:
    def test_core(self, capsys):
        assert main(["verify", "core"]) == 0
        lines = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()]
        assert lines[-1]["passed"] and lines[-1]["failures"] == 0
        assert {ln["check"] for ln in lines[:-1]} >= {"payoff_exactness", "param_counts", "multichannel"}

    def test_unknown_suite(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "nope"])
        assert exc.value.code == 2

    def test_sde_deterministic(self, capsys):
        main(["verify", "sde", "--seed", "4"])
        first = [{k: v for k, v in json.loads(ln).items() if k != "seconds"}
                 for ln in capsys.readouterr().out.splitlines()]
        main(["verify", "sde", "--seed", "4"])
        second = [{k: v for k, v in json.loads(ln).items() if k != "seconds"}
                  for ln in capsys.readouterr().out.splitlines()]
        assert first == second and first[-1]["passed"]
