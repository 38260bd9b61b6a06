"""Circular positional encodings.

Positions live on the unit circle: p_0 = (0, 1) and each successive position
rotates by a quantised step angle. The step is "quantised" in the sense that
we take the float64 values of sin/cos at the requested angle, renormalise
them onto the circle, and treat the angle they actually encode (via atan2)
as the true step. Everything downstream -- capacity accounting, the
increment weights, decoding by nearest position -- uses the quantised step,
so the table the encoder writes and the rotations the network performs are
bit-identical.

p_0 is reserved as the null reference: row 0 of the input matrix carries a
zero encoding, and (0, 1) is what pointer-like variables are reset to.
"""

from __future__ import annotations

import math

import numpy as np


def quantized_step(delta: float) -> tuple[float, float]:
    """(sin, cos) of the step angle, renormalised onto the unit circle."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    s = math.sin(delta)
    c = math.cos(delta)
    r = math.hypot(s, c)
    return s / r, c / r


def step_angle(delta: float) -> float:
    """The angle actually encoded by the quantised step."""
    s, c = quantized_step(delta)
    return math.atan2(s, c)


def position_capacity(delta: float) -> int:
    """Number of distinct positions p_0, p_1, ... the step supports.

    floor(2*pi / step_angle): one full turn's worth of steps. Indices
    0 .. capacity-1 are guaranteed pairwise distinct.
    """
    return int(math.floor(2.0 * math.pi / step_angle(delta)))


def rotate_step(x: float, y: float, s: float, c: float) -> tuple[float, float]:
    """One rotation step, with a fixed operation order.

    The increment weights reproduce exactly this sequence of float64
    operations (multiply, then add), so the rotated coordinates the network
    computes are bit-identical to the enumerated table.
    """
    xr = x * c
    xr = xr + y * (-s)
    yr = x * s
    yr = yr + y * c
    return xr, yr


def enumerate_positions(count: int, delta: float) -> np.ndarray:
    """Positions p_0 .. p_count as a (count+1, 2) float64 array."""
    if count < 0:
        raise ValueError("count must be >= 0")
    s, c = quantized_step(delta)
    out = np.empty((count + 1, 2), dtype=np.float64)
    x, y = 0.0, 1.0
    out[0] = (x, y)
    for i in range(1, count + 1):
        x, y = rotate_step(x, y, s, c)
        out[i] = (x, y)
    return out


def nearest_position(x: float, y: float, positions: np.ndarray) -> int:
    """Index of the position closest to (x, y); lowest index wins ties."""
    d = (positions[:, 0] - x) ** 2 + (positions[:, 1] - y) ** 2
    return int(np.argmin(d))
