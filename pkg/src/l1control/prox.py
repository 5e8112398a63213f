"""Closed-form proximal maps for the box and L1 terms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Control bounds ``a <= u <= b`` with ``a <= 0 <= b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a <= 0.0 <= self.b):
            raise ValueError(f"box must satisfy a <= 0 <= b, got [{self.a}, {self.b}]")


def project_box(v, box: Box) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), box.a, box.b)


def soft_threshold(v, beta: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - beta, 0.0)


def project_interval(v, beta: float) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), -beta, beta)


def support_box_value(nu, box: Box) -> float:
    """sup over w in [a,b]^n of <nu, w>."""
    nu = np.asarray(nu, dtype=float)
    return float(box.b * np.maximum(nu, 0.0).sum() + box.a * np.minimum(nu, 0.0).sum())


def prox_support_box(c, d, box: Box) -> np.ndarray:
    """argmin_nu  sum_i support_box(nu_i) + (d_i/2)(nu_i - c_i)^2.

    Moreau decomposition: ``nu = c - Pi_[a,b](d*c) / d``.
    """
    c = np.asarray(c, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), c.shape)
    if np.any(d <= 0):
        raise ValueError("prox weights must be positive")
    return c - np.clip(d * c, box.a, box.b) / d


def support_subdifferential_gap(nu, g, box: Box, zero_tol: float | None = None) -> np.ndarray:
    """Distance of ``g`` from the subdifferential of the box support function at ``nu``.

    The subdifferential is {b} for nu > 0, {a} for nu < 0 and [a, b] at 0.
    Entries with |nu| <= zero_tol count as zero (default: 1e-14 relative to
    max|nu| and |g|), since a prox evaluated in floating point leaves
    rounding-sized residue where the exact answer is 0.
    """
    nu = np.asarray(nu, dtype=float)
    g = np.asarray(g, dtype=float)
    if zero_tol is None:
        zero_tol = 1e-14 * max(1.0, float(np.max(np.abs(nu), initial=0.0)), float(np.max(np.abs(g), initial=0.0)))
    nu = np.where(np.abs(nu) <= zero_tol, 0.0, nu)
    return np.where(nu > 0, np.abs(g - box.b),
                    np.where(nu < 0, np.abs(g - box.a), np.maximum(0.0, np.maximum(box.a - g, g - box.b))))
