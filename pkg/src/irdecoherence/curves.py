"""Sampled reduced-dynamics curves shared by both models."""
from dataclasses import dataclass, field

import numpy as np

from .io import csv_text, json_text

CURVE_COLUMNS = ("t", "a_t", "b_t", "abs_chi", "exponent", "envelope_phi")


@dataclass(frozen=True, eq=False)
class DecoherenceCurve:
    """``t -> (a(t), b(t), |chi|, -log|chi|, envelope)`` with provenance."""

    times: np.ndarray
    a_t: np.ndarray
    b_t: np.ndarray
    abs_chi: np.ndarray
    exponent: np.ndarray
    envelope_phi: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name in ("a_t", "b_t", "abs_chi", "exponent", "envelope_phi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have the same length as times")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))

    def columns(self):
        return dict(zip(CURVE_COLUMNS, (self.times, self.a_t, self.b_t, self.abs_chi,
                                        self.exponent, self.envelope_phi)))

    def to_csv(self):
        return csv_text(self.columns())

    def to_json(self):
        return json_text({"metadata": self.metadata,
                          **{k: v for k, v in self.columns().items()}})
