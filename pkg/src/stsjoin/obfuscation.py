"""Bounded Laplace noise for client-side coordinate obfuscation.

The noise density is a Laplace density of scale ``b`` truncated to
``[-theta_ob, theta_ob]`` and renormalised by ``lam``.  Samples are drawn by
inverting the piecewise CDF analytically.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Hashable, Optional

import numpy as np

from .errors import OutOfRangeError, ParameterError
from .geometry import TrajPoint, Trajectory


@dataclass(frozen=True)
class NoiseParams:
    theta_ob: float
    b: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.theta_ob) and self.theta_ob > 0):
            raise ParameterError(f"theta_ob must be finite and > 0, got {self.theta_ob}")
        if self.b is None:
            object.__setattr__(self, "b", self.theta_ob / 3.0)
        if not (math.isfinite(self.b) and self.b > 0):
            raise ParameterError(f"b must be finite and > 0, got {self.b}")

    @property
    def lam(self) -> float:
        return normalization_constant(self)


def normalization_constant(params: NoiseParams) -> float:
    # -expm1(-r) == 1 - exp(-r) without cancellation for small r
    return 1.0 / -math.expm1(-params.theta_ob / params.b)


def bounded_laplace_pdf(x, params: NoiseParams):
    x = np.asarray(x, dtype=float)
    dens = params.lam / (2.0 * params.b) * np.exp(-np.abs(x) / params.b)
    return np.where(np.abs(x) <= params.theta_ob, dens, 0.0)


def bounded_laplace_cdf(x, params: NoiseParams):
    """Piecewise CDF on ``[-theta_ob, theta_ob]``; vectorised over ``x``."""
    b, th, lam = params.b, params.theta_ob, params.lam
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > th):
        raise OutOfRangeError(f"x outside support [-{th}, {th}]")
    neg = 0.5 * lam * (np.exp(np.minimum(xa, 0.0) / b) - math.exp(-th / b))
    pos = 0.5 + 0.5 * lam * -np.expm1(-np.maximum(xa, 0.0) / b)
    out = np.where(xa < 0, neg, pos)
    return float(out) if out.ndim == 0 else out


def inverse_cdf(y, params: NoiseParams):
    """Exact inverse of :func:`bounded_laplace_cdf` for ``y`` in ``[0, 1]``."""
    b, lam = params.b, params.lam
    y = np.asarray(y, dtype=float)
    inv = 1.0 / lam
    lower = b * np.log(1.0 - inv + 2.0 * inv * np.minimum(y, 0.5))
    upper = -b * np.log(1.0 - inv + 2.0 * inv * (1.0 - np.maximum(y, 0.5)))
    out = np.clip(np.where(y <= 0.5, lower, upper), -params.theta_ob, params.theta_ob)
    return float(out) if out.ndim == 0 else out


def sample_noise(params: NoiseParams, rng: np.random.Generator, size=None):
    """Draw bounded Laplace noise; ``size`` follows numpy conventions."""
    y = rng.random(size)
    # Generator.random is on [0, 1); 0 maps to the support edge, which is harmless
    return inverse_cdf(y, params)


def client_rng(seed: int, client_id: Hashable) -> np.random.Generator:
    """Deterministic per-client stream derived from the root seed."""
    digest = hashlib.blake2b(repr(client_id).encode(), digest_size=8).digest()
    return np.random.default_rng([int(seed) & (2**64 - 1), int.from_bytes(digest, "little")])


def obfuscate_trajectory(traj: Trajectory, params: NoiseParams,
                         rng: np.random.Generator) -> Trajectory:
    noise = sample_noise(params, rng, size=(len(traj.points), 2))
    pts = [TrajPoint(p.x + float(dx), p.y + float(dy), p.t)
           for p, (dx, dy) in zip(traj.points, noise)]
    return traj.with_points(pts)
