"""Scenario reports: computed values, per-assertion pass/fail, serialization.

Every assertion carries the two compared numbers and the tolerance used, so
a report is self-contained evidence.  Serialization is deterministic
(sorted keys, canonical floats); the wall-time field is excluded from the
digest so identical runs produce byte-identical reports modulo wall time.
"""
import csv
import hashlib
import io
import json
from dataclasses import dataclass, field


@dataclass
class Check:
    """One verified assertion: observed value against a bound at a tolerance."""
    name: str
    tag: str
    observed: float
    bound: float
    tol: float
    passed: bool
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "tag": self.tag,
                "observed": _jsonable(self.observed),
                "bound": _jsonable(self.bound),
                "tol": self.tol, "passed": bool(self.passed),
                "note": self.note}


@dataclass
class Report:
    """Outcome of one scenario run."""
    scenario: str
    values: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    inputs_digest: str = ""
    wall_time: float = 0.0

    def add_check(self, check: Check):
        self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, with_wall_time: bool = True) -> dict:
        d = {
            "scenario": self.scenario,
            "inputs_digest": self.inputs_digest,
            "values": {k: _jsonable(v) for k, v in sorted(self.values.items())},
            "checks": [c.to_dict() for c in self.checks],
            "warnings": list(self.warnings),
            "seeds": dict(sorted(self.seeds.items())),
            "params": {k: _jsonable(v) for k, v in sorted(self.params.items())},
            "passed": self.passed,
        }
        if with_wall_time:
            d["wall_time"] = self.wall_time
        return d

    def digest(self) -> str:
        """Hash of the report content, wall time excluded."""
        blob = json.dumps(self.to_dict(with_wall_time=False), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_json(self, with_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(with_wall_time), sort_keys=True, indent=2)

    def csv_summary(self) -> str:
        """One CSV row per assertion plus a scenario summary row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "check", "tag", "observed", "bound",
                    "tol", "passed"])
        for c in self.checks:
            w.writerow([self.scenario, c.name, c.tag,
                        repr(float(c.observed)), repr(float(c.bound)),
                        repr(float(c.tol)), c.passed])
        w.writerow([self.scenario, "ALL", "", "", "", "", self.passed])
        return buf.getvalue()


def config_digest(config: dict) -> str:
    """Stable hash of a scenario configuration (output paths excluded)."""
    clean = {k: v for k, v in config.items() if k not in ("out", "format")}
    blob = json.dumps(clean, sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(v):
    import numpy as np
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and (v != v or v in (float("inf"), float("-inf"))):
        return repr(v)
    return v
