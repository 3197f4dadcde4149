import csv
import io
import json
import math

import pytest
from click.testing import CliRunner

from foed_lab.cli import cli, sanitize


def run(args, tmp_path=None, config=None):
    full = []
    if config is not None:
        p = tmp_path / "run.json"
        p.write_text(json.dumps(config))
        full += ["--config", str(p)]
    return CliRunner().invoke(cli, full + args, catch_exceptions=False)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_foed_curve_default_grid():
    res = run(["foed-curve"])
    assert res.exit_code == 0
    out = rows(res.output)
    assert len(out) == 6
    at = {(float(r["t"]), float(r["x"])): r for r in out}
    assert abs(float(at[(1.0, 0.0)]["exponent"]) - 0.70710678) < 1e-8


def test_foed_curve_edge_grids(tmp_path):
    res = run(["foed-curve"], tmp_path, {"foed_curve": {"times": [], "points": [0.0]}})
    assert res.output == "t,x,exponent,rate,marginal_density\n"
    res = run(["foed-curve"], tmp_path, {"foed_curve": {"times": [0.0], "points": [0.5]}})
    r = rows(res.output)[0]
    assert float(r["exponent"]) == 1.0
    assert abs(float(r["marginal_density"]) - math.exp(-0.125) / math.sqrt(2 * math.pi)) < 1e-15


def test_fdd_bivariate_vs_forward_on_orthant():
    biv = json.loads(run(["fdd", "--method", "bivariate"]).output)
    fwd = json.loads(run(["fdd", "--method", "forward"]).output)
    assert biv["result"]["comparisons"]["gap"] <= 1e-4
    assert abs(biv["result"]["value"] - fwd["result"]["value"]) <= 1e-4
    assert biv["config"]["fdd"]["method"] == "bivariate"


def test_fdd_monte_carlo_carries_seed(tmp_path):
    out = json.loads(run(["--seed", "3", "fdd", "--method", "mc"], tmp_path,
                         {"fdd": {"mc_samples": 20000}}).output)
    mc = out["result"]["monte_carlo"]
    assert mc["seed"] == 3 and mc["n_samples"] == 20000
    assert out["result"]["comparisons"]["gap"] < 4 * mc["std_error"]


def test_bivariate_needs_unit_initial_factor(tmp_path):
    res = run(["fdd"], tmp_path, {"fdd": {"initial": {"name": "exp_neg_sq"}}})
    assert res.exit_code == 2


def test_conditional_gaussian_case():
    out = json.loads(run(["conditional"]).output)
    assert abs(out["result"]["value"] - 4 / 3) < 1e-6
    assert out["result"]["variant"] == "bridge"
    assert abs(out["result"]["comparisons"]["gaussian_oracle"] - 4 / 3) < 1e-12
    inc = json.loads(run(["conditional", "--method", "increment_form"]).output)
    assert abs(inc["result"]["value"] - 4 / 3) < 1e-6


def test_kolmogorov_identical_laws_and_curve(tmp_path):
    curve = tmp_path / "psi.csv"
    out = json.loads(run(["kolmogorov", "--csv", str(curve)]).output)
    assert out["result"]["distance"] < 1e-8
    assert out["result"]["status"] == "degenerate"
    assert curve.read_text().startswith("x,psi\n")


def test_model_flags_and_out_file(tmp_path):
    target = tmp_path / "k.json"
    res = run(["--model", "ou_shift", "--param", "a=1", "--param", "lambda=0.5", "--out", str(target),
               "kolmogorov"])
    assert res.exit_code == 0 and res.output == ""
    out = json.loads(target.read_text())
    assert out["config"]["model"] == {"name": "ou_shift", "params": {"a": 1.0, "lambda": 0.5}}
    assert abs(out["result"]["distance"] - 0.07622193561969193) < 1e-10


def test_tolerance_flags_land_in_config():
    out = json.loads(run(["--tol-abs", "1e-11", "--tol-rel", "1e-9", "conditional"]).output)
    assert out["config"]["quadrature"]["abs_tol"] == 1e-11
    assert out["config"]["quadrature"]["rel_tol"] == 1e-9


@pytest.mark.parametrize("args", [["--model", "nope", "foed-curve"], ["--param", "a", "foed-curve"],
                                  ["--param", "a=x", "foed-curve"], ["fdd", "--method", "nope"]])
def test_usage_errors_exit_2(args):
    assert run(args).exit_code == 2


def test_bad_config_reports_key(tmp_path):
    res = run(["fdd"], tmp_path, {"fdd": {"gird": [1.0]}})
    assert res.exit_code == 2
    assert "fdd.gird" in res.output


def test_verify_subset():
    res = run(["verify", "--group", "semiflow", "--group", "transition_ratio"])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["schema_version"] == 1
    assert {r["status"] for r in doc["result"]["rows"]} == {"pass", "flag"}
    assert all(r["anchor"] for r in doc["result"]["rows"])
    assert run(["verify", "--group", "nope"]).exit_code == 2


def test_failing_row_sets_exit_code(monkeypatch):
    from foed_lab import cli as cli_module
    from foed_lab.report import IdentityReport, VerificationLedger

    def fake(settings):
        ledger = VerificationLedger()
        ledger.add(IdentityReport("broken", 1.0, 2.0, 1e-3, "anchor"))
        ledger.add(IdentityReport("erratum", 1.0, 2.0, 1e-3, "anchor", expect_gap=True))
        return ledger

    monkeypatch.setattr(cli_module, "run_verification", fake)
    res = run(["verify"])
    assert res.exit_code == 1
    assert json.loads(res.output)["result"]["summary"] == {"fail": 1, "flag": 1}


def test_flag_rows_alone_keep_exit_code_zero(monkeypatch):
    from foed_lab import cli as cli_module
    from foed_lab.report import IdentityReport, VerificationLedger

    def fake(settings):
        ledger = VerificationLedger()
        ledger.add(IdentityReport("erratum", 1.0, 2.0, 1e-3, "anchor", expect_gap=True))
        return ledger

    monkeypatch.setattr(cli_module, "run_verification", fake)
    assert run(["verify"]).exit_code == 0


def test_sanitize():
    import numpy as np
    assert sanitize({"a": np.float64(1.5), "b": [math.nan, np.int64(2)], "c": np.array([True])}) == {
        "a": 1.5, "b": [None, 2], "c": [True]}
