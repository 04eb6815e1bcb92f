"""Explicit Runge-Kutta steppers shared by the point-vortex and particle solvers."""
from __future__ import annotations

import math

import numpy as np


def rk4_step(f, t, y, h):
    """One classical fourth-order Runge-Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(t_end: float, dt: float) -> int:
    """Number of uniform steps of size <= dt covering [0, t_end]."""
    if t_end <= 0.0:
        return 0
    ratio = t_end / dt
    n = round(ratio)
    if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
        return max(int(n), 1)
    return int(math.ceil(ratio))


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dopri_step(f, t, y, h):
    """Dormand-Prince step; returns the fifth-order solution and an error estimate."""
    ks = []
    for i in range(7):
        yi = y
        for a, k in zip(_A[i], ks):
            if a != 0.0:
                yi = yi + (h * a) * k
        ks.append(f(t + _C[i] * h, yi))
    y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y_new, err


def error_norm(err, y, y_new, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))
