"""Records for verified identities and the ledger that collects them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass(frozen=True)
class IdentityReport:
    """Both sides of one numerical identity and how far apart they are.

    ``status`` is ``"pass"`` when the absolute gap is within ``tolerance``,
    ``"flag"`` for rows that are expected to disagree (reported, not judged),
    ``"fail"`` otherwise and ``"error"`` when the computation itself failed.
    """

    name: str
    lhs: float
    rhs: float
    tolerance: float = math.nan
    anchor: str = ""
    expect_gap: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def abs_err(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.abs_err / scale if scale > 0 else 0.0

    @property
    def status(self) -> str:
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            return "error"
        if self.expect_gap:
            return "flag"
        if math.isnan(self.tolerance):
            return "pass"
        return "pass" if self.abs_err <= self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.update(abs_err=self.abs_err, rel_err=self.rel_err, status=self.status)
        return d


@dataclass
class VerificationLedger:
    rows: list[dict[str, Any]] = field(default_factory=list)

    def add(self, report: IdentityReport) -> None:
        self.rows.append(report.to_dict())

    def add_error(self, name: str, anchor: str, message: str) -> None:
        self.rows.append({
            "name": name, "anchor": anchor, "lhs": None, "rhs": None,
            "abs_err": None, "rel_err": None, "status": "error", "message": message,
        })

    @property
    def failed(self) -> bool:
        return any(r["status"] in ("fail", "error") for r in self.rows)

    def summary(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rows:
            out[r["status"]] = out.get(r["status"], 0) + 1
        return dict(sorted(out.items()))
