"""Model variants: restricted/unrestricted 4-state, Student-t 4-state, 2-state, GARCH(1,1)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regime import MS4_ZERO_MASK


@dataclass(frozen=True)
class ModelSpec:
    name: str
    K: int
    zero_mask: frozenset = frozenset()
    student_t: bool = False
    sign_restricted: bool = True
    long_run: bool = True
    label: str = ""

    @property
    def is_markov_switching(self) -> bool:
        return self.K > 0

    def free_mask(self) -> np.ndarray:
        free = np.ones((self.K, self.K), dtype=bool)
        for i, j in self.zero_mask:
            free[i, j] = False
        return free

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "K": self.K,
            "zero_mask": sorted([i + 1, j + 1] for i, j in self.zero_mask),
            "student_t": self.student_t,
            "sign_restricted": self.sign_restricted,
            "long_run": self.long_run,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if d["name"] in SPECS:
            return SPECS[d["name"]]
        return cls(
            name=d["name"],
            K=int(d["K"]),
            zero_mask=frozenset((i - 1, j - 1) for i, j in d.get("zero_mask", [])),
            student_t=bool(d.get("student_t", False)),
            sign_restricted=bool(d.get("sign_restricted", True)),
            long_run=bool(d.get("long_run", True)),
        )


MS4 = ModelSpec("ms4", 4, MS4_ZERO_MASK, label="MS4")
MS4_UNRESTRICTED = ModelSpec("ms4u", 4, frozenset(), label="MS4 Unrestricted")
MS4_T = ModelSpec("ms4t", 4, MS4_ZERO_MASK, student_t=True, label="MS4t")
MS2 = ModelSpec("ms2", 2, frozenset(), long_run=False, label="MS2")
GARCH11 = ModelSpec("garch11", 0, label="GARCH11")

SPECS = {s.name: s for s in (MS4, MS4_UNRESTRICTED, MS4_T, MS2, GARCH11)}


def get_spec(name: str) -> ModelSpec:
    try:
        return SPECS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(SPECS)}") from None
