from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckReport:
    """Outcome of one executable check.

    ``passed`` is True iff ``measured <= bound + tolerance``; implication-style
    checks set ``measured`` to the violation count and ``bound`` to zero.
    """

    name: str
    passed: bool
    measured: float
    bound: float
    tolerance: float = 0.0
    witnesses: list = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.passed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": _jsonable(self.measured),
            "bound": _jsonable(self.bound),
            "tolerance": _jsonable(self.tolerance),
            "witnesses": [_jsonable(w) for w in self.witnesses[:20]],
            "details": {k: _jsonable(v) for k, v in sorted(self.details.items())},
        }


def _jsonable(value):
    import numpy as np

    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if v != v or v in (float("inf"), float("-inf")):
            return repr(v)
        return v
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in sorted(value.items())}
    return value
