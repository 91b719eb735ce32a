"""Reproducible disorder draws.

Every draw comes from a Philox generator keyed by the run seed with the
counter set to ``(sample index, parameter index)``, so a draw does not depend
on how samples are distributed over workers or in what order they run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# stable parameter indices; never reorder, only append
PARAM_INDEX = {"E_z": 0, "E_perp": 1, "delta_b": 2, "theta": 3}

MAX_REJECTION_ATTEMPTS = 100_000


@dataclass(frozen=True)
class TruncatedGaussian:
    """Zero-mean Gaussian of width ``sigma`` restricted to ``[lo, hi]``."""

    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.lo < self.hi:
            raise ValueError(f"degenerate truncation interval [{self.lo}, {self.hi}]")
        if self.sigma == 0 and not self.lo <= 0 <= self.hi:
            raise ValueError("sigma = 0 requires the interval to contain 0")

    def draw(self, rng: np.random.Generator) -> float:
        if self.sigma == 0:
            return 0.0
        for _ in range(MAX_REJECTION_ATTEMPTS):
            x = rng.normal(0.0, self.sigma)
            if self.lo <= x <= self.hi:
                return float(x)
        raise RuntimeError(
            f"rejection sampling failed after {MAX_REJECTION_ATTEMPTS} attempts for {self}"
        )


PRESETS = {
    "E_z": TruncatedGaussian(0.25, -0.73, 0.73),
    "E_perp": TruncatedGaussian(0.5, -1.5, 1.5),
    "delta_b": TruncatedGaussian(1.0, -3.0, 3.0),
}
# wider strain distribution used with the slow 10 MHz/ms sweeps
E_PERP_WIDE = TruncatedGaussian(1.0, -3.0, 3.0)


def counter_rng(seed: int, k: int, param: int) -> np.random.Generator:
    if seed < 0 or k < 0 or param < 0:
        raise ValueError("seed, sample index and parameter index must be non-negative")
    return np.random.Generator(np.random.Philox(key=seed, counter=[k, param, 0, 0]))


@dataclass(frozen=True)
class DisorderModel:
    """Per-sample random parameters.

    ``theta`` is the fixed field angle in radians. If ``theta_max`` is given,
    ``theta`` is instead drawn from the solid-angle measure ``sin(theta)``
    restricted to ``theta <= theta_max``.
    """

    params: dict = field(default_factory=dict)
    theta: float = 0.0
    theta_max: float | None = None
    n_samples: int = 300
    seed: int = 0

    def __post_init__(self):
        for name in self.params:
            if name not in PARAM_INDEX or name == "theta":
                raise ValueError(f"unknown disorder parameter {name!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.theta_max is not None and not 0 < self.theta_max <= np.pi:
            raise ValueError("theta_max must lie in (0, pi]")

    @classmethod
    def preset(cls, names=("E_z", "E_perp", "delta_b"), **kw) -> "DisorderModel":
        return cls(params={n: PRESETS[n] for n in names}, **kw)

    def with_(self, **kw) -> "DisorderModel":
        return replace(self, **kw)


def sample_disorder(model: DisorderModel, k: int) -> dict[str, float]:
    """Draw sample ``k``. ``E_perp`` is returned as a magnitude."""
    out = {}
    for name, dist in model.params.items():
        x = dist.draw(counter_rng(model.seed, k, PARAM_INDEX[name]))
        out[name] = abs(x) if name == "E_perp" else x
    if model.theta_max is None:
        out["theta"] = float(model.theta)
    else:
        u = counter_rng(model.seed, k, PARAM_INDEX["theta"]).random()
        c_min = np.cos(model.theta_max)
        out["theta"] = float(np.arccos(1 - u * (1 - c_min)))
    return out

