"""Structured numeric verdicts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


@dataclass(frozen=True)
class Check:
    """One numeric comparison: ``value <op> threshold``.

    ``op`` is "le" or "ge"; "eq" compares with ``abs(value - threshold) <=
    tol``; "se" passes when ``|value| <= threshold * standard_error``.
    """

    name: str
    value: float
    threshold: float
    op: str = "le"
    standard_error: Optional[float] = None
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        v = self.value
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        if self.op == "le":
            return v <= self.threshold
        if self.op == "ge":
            return v >= self.threshold
        if self.op == "lt":
            return v < self.threshold
        if self.op == "gt":
            return v > self.threshold
        if self.op == "eq":
            return abs(v - self.threshold) <= self.tol
        if self.op == "se":
            return abs(v) <= self.threshold * self.standard_error
        raise ValueError(f"unknown op {self.op!r}")

    def to_dict(self) -> dict:
        return _clean({"name": self.name, "value": self.value,
                       "standard_error": self.standard_error, "threshold": self.threshold,
                       "op": self.op, "pass": self.passed})


@dataclass
class Report:
    """Named checks plus free-form diagnostics; passes iff every check does."""

    name: str
    checks: list[Check] = field(default_factory=list)
    info: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def add(self, name, value, threshold, op="le", standard_error=None, tol=0.0) -> Check:
        c = Check(name, float(value) if value is not None else float("nan"), float(threshold),
                  op, None if standard_error is None else float(standard_error), tol)
        self.checks.append(c)
        return c

    def extend(self, other: "Report", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.value, c.threshold, c.op,
                                     c.standard_error, c.tol))
        for k, v in other.info.items():
            self.info[prefix + k] = v
        for k, v in other.artifacts.items():
            self.artifacts[prefix + k] = v

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def value(self, name: str) -> float:
        return self[name].value

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed,
                "checks": [c.to_dict() for c in self.checks], "info": _clean(self.info)}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def summary(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            se = "" if c.standard_error is None else f" (se {c.standard_error:.3g})"
            lines.append(f"  [{'ok' if c.passed else 'XX'}] {c.name} = {c.value:.6g}{se}"
                         f" {c.op} {c.threshold:.6g}")
        return "\n".join(lines)
