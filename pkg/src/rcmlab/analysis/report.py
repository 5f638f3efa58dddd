"""Verification reports: statistics, fitted constants and verdicts of a suite run."""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def config_hash(inputs: dict) -> str:
    blob = json.dumps(_plain(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class VerificationReport:
    """Outcome of one suite.

    Each entry of ``statistics`` is ``{"value": v, "se": s}`` or
    ``{"value": v, "exact": True}``.  Verdicts are booleans computed from
    the statistics and the tolerances recorded next to them.
    """

    suite: str
    inputs: dict
    statistics: dict = field(default_factory=dict)
    fitted_constants: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    timestamp: str | None = None

    @property
    def provenance(self) -> str:
        return config_hash({"suite": self.suite, "inputs": self.inputs})

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(self.verdicts.values())

    def stat(self, name: str, value, se=None) -> None:
        if se is None:
            self.statistics[name] = {"value": value, "exact": True}
        else:
            self.statistics[name] = {"value": value, "se": se}

    def verdict(self, name: str, ok, tolerance=None) -> bool:
        self.verdicts[name] = bool(ok)
        if tolerance is not None:
            self.tolerances[name] = tolerance
        return bool(ok)

    def value(self, name: str):
        return self.statistics[name]["value"]

    def stamp(self) -> "VerificationReport":
        self.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        return self

    def to_dict(self, with_timestamp: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "suite": self.suite,
            "inputs": self.inputs,
            "statistics": self.statistics,
            "fitted_constants": self.fitted_constants,
            "tolerances": self.tolerances,
            "verdicts": self.verdicts,
            "passed": self.passed,
            "notes": self.notes,
            "provenance": self.provenance,
        }
        if with_timestamp:
            out["timestamp"] = self.timestamp
        return _plain(out)

    def to_json(self, with_timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(with_timestamp), sort_keys=True, indent=2)

    def summary_lines(self) -> list[str]:
        return [f"{self.suite}.{k}: {'PASS' if v else 'FAIL'}" for k, v in self.verdicts.items()]
