"""Transfer functions: scalar value to RGBA, plus opacity correction.

Opacity in a transfer function is defined per `reference_step` millimetres
of path length.  Renderers sampling at a different step size rescale each
sample's alpha with `opacity_correct`, which keeps the composited result
independent of the sampling rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear scalar -> RGBA map with clamped ends."""

    values: np.ndarray          # (n,) float64, strictly increasing HU
    rgba: np.ndarray            # (n, 4) float64 in [0, 1]
    reference_step: float       # mm of path length one alpha unit refers to

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        rgba = np.asarray(self.rgba, dtype=np.float64).reshape(-1, 4)
        if values.size < 2:
            raise ValueError("a transfer function needs at least two control points")
        if values.size != rgba.shape[0]:
            raise ValueError("values and rgba rows must match")
        if not np.all(np.diff(values) > 0):
            raise ValueError("control point values must be strictly increasing")
        if np.any(rgba < 0) or np.any(rgba > 1):
            raise ValueError("rgba channels must lie in [0, 1]")
        if not self.reference_step > 0:
            raise ValueError("reference_step must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "rgba", rgba)
        object.__setattr__(self, "reference_step", float(self.reference_step))

    @classmethod
    def from_points(cls, points, reference_step: float = 1.0) -> "TransferFunction":
        """Build from an iterable of (value, (r, g, b, a)) pairs."""
        pts = list(points)
        values = np.array([v for v, _ in pts], dtype=np.float64)
        rgba = np.array([c for _, c in pts], dtype=np.float64)
        return cls(values=values, rgba=rgba, reference_step=reference_step)

    @property
    def points(self) -> list[tuple[float, tuple[float, float, float, float]]]:
        return [(float(v), tuple(float(c) for c in row)) for v, row in zip(self.values, self.rgba)]

    def to_json_dict(self) -> dict:
        return {
            "reference_step_mm": self.reference_step,
            "points": [{"value": v, "rgba": list(c)} for v, c in self.points],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TransferFunction":
        points = [(p["value"], tuple(p["rgba"])) for p in data["points"]]
        return cls.from_points(points, reference_step=float(data["reference_step_mm"]))

    @classmethod
    def load(cls, path: str | Path) -> "TransferFunction":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def default_ct_preset() -> TransferFunction:
    """Bone-and-soft-tissue preset used when a patient ships no transfer map."""
    return TransferFunction.from_points(
        [
            (-1000.0, (0.0, 0.0, 0.0, 0.0)),
            (-100.0, (0.0, 0.0, 0.0, 0.0)),
            (40.0, (0.55, 0.25, 0.2, 0.05)),
            (300.0, (0.85, 0.8, 0.7, 0.25)),
            (1500.0, (1.0, 1.0, 0.95, 0.9)),
        ],
        reference_step=1.0,
    )


def tf_eval(tf: TransferFunction, s):
    """Evaluate the transfer function at scalar(s) `s`.

    Values outside the control-point range clamp to the nearest endpoint.
    Accepts a float or an array; returns (4,) or (N, 4) float64.
    """
    s_arr = np.asarray(s, dtype=np.float64)
    single = s_arr.ndim == 0
    flat = s_arr.reshape(-1)
    out = np.empty((flat.size, 4), dtype=np.float64)
    for ch in range(4):
        out[:, ch] = np.interp(flat, tf.values, tf.rgba[:, ch])
    return out[0] if single else out.reshape(s_arr.shape + (4,))


def opacity_correct(alpha, step: float, reference_step: float):
    """Rescale per-sample opacity from `reference_step` to `step` mm.

    Returns 1 - (1 - alpha)^(step / reference_step); accepts scalars or
    arrays.  The identity at step == reference_step and the inverse
    relation opacity_correct(opacity_correct(a, s, r), r, s) == a follow
    from the exponent arithmetic.
    """
    if not step > 0 or not reference_step > 0:
        raise ValueError("step and reference_step must be positive")
    a = np.asarray(alpha, dtype=np.float64)
    out = 1.0 - np.power(1.0 - a, step / reference_step)
    return float(out) if out.ndim == 0 else out
