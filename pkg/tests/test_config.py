import json

import pytest

from foed_lab import config as rc
from foed_lab.errors import ConfigError
from foed_lab.functions import TestFunction


def test_defaults_resolve_to_a_copy():
    a = rc.resolve()
    a["fdd"]["grid"].append(9.0)
    assert rc.resolve()["fdd"]["grid"] == [1.0, 2.0]
    assert a["schema_version"] == rc.SCHEMA_VERSION


def test_sections_merge_and_values_replace():
    cfg = rc.resolve({"fdd": {"grid": [1.0, 2.0, 3.0]}, "quadrature": {"abs_tol": 1e-12}})
    assert cfg["fdd"]["grid"] == [1.0, 2.0, 3.0]
    assert cfg["fdd"]["method"] == "backward_bivariate"
    assert cfg["quadrature"]["abs_tol"] == 1e-12 and cfg["quadrature"]["rel_tol"] == 1e-8


def test_new_model_drops_default_params():
    cfg = rc.resolve({"model": {"name": "ou_shift"}})
    assert cfg["model"] == {"name": "ou_shift", "params": {}}


@pytest.mark.parametrize("doc", [{"nope": 1}, {"fdd": {"nope": 1}}, {"fdd": 3}, {"schema_version": 2}])
def test_bad_documents_are_rejected(doc):
    with pytest.raises(ConfigError):
        rc.resolve(doc)


def test_json_errors_carry_line_and_column(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "fdd": {,\n}')
    with pytest.raises(ConfigError, match="line 2, column 11"):
        rc.load_document(p)
    p.write_text(json.dumps([1]))
    with pytest.raises(ConfigError):
        rc.load_document(p)


def test_function_entries():
    f = rc.function_from({"name": "indicator", "params": {"c": 0.5}}, "x")
    assert isinstance(f, TestFunction) and f.params == {"c": 0.5}
    assert rc.function_from("exp_neg_sq", "x").name == "exp_neg_sq"
    for bad in ({"params": {}}, {"name": "indicator", "extra": 1}, {"name": "nope"},
                {"name": "indicator", "params": {"q": 1}}, {"name": "gaussian_bump", "params": {"width": 0}}):
        with pytest.raises(ConfigError):
            rc.function_from(bad, "x")
    f0, fs = rc.functions_from(rc.resolve()["fdd"], "fdd")
    assert f0.is_constant and len(fs) == 2
