import math

from foed_lab.report import IdentityReport, VerificationLedger


def test_status_rules():
    assert IdentityReport("a", 1.0, 1.0 + 1e-9, 1e-8).status == "pass"
    assert IdentityReport("a", 1.0, 1.1, 1e-8).status == "fail"
    assert IdentityReport("a", 1.0, 1.1, 1e-8, expect_gap=True).status == "flag"
    assert IdentityReport("a", math.nan, 1.0, 1e-8, expect_gap=True).status == "error"
    assert IdentityReport("a", 2.0, 1.0).status == "pass"  # no tolerance declared
    r = IdentityReport("a", 2.0, 1.0, 0.5, "anchor")
    assert (r.abs_err, r.rel_err) == (1.0, 0.5)
    assert r.to_dict()["status"] == "fail"


def test_ledger_summary_and_failure():
    ledger = VerificationLedger()
    ledger.add(IdentityReport("a", 1.0, 1.0, 1e-8, "x"))
    ledger.add(IdentityReport("b", 1.0, 2.0, 1e-8, "x", expect_gap=True))
    assert not ledger.failed
    ledger.add_error("c", "x", "boom")
    assert ledger.failed
    assert ledger.summary() == {"error": 1, "flag": 1, "pass": 1}
