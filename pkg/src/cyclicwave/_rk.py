"""Vectorized adaptive Dormand-Prince 5(4) integrator.

The Hill-equation scans integrate the same small ODE system for thousands of
parameter values at once, which scipy's per-call solvers cannot do cheaply.
This integrator advances a whole batch with a shared step size; the step is
controlled by the worst error over the batch, so every batch member meets the
requested tolerance.  States have shape (batch, dim).
"""

import numpy as np

from .errors import IntegrationFailure

# Dormand-Prince 5(4) tableau (FSAL).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI step controller exponents for a 5(4) pair
_KI = 0.4 / 5.0
_KP = 0.3 / 5.0


def integrate(rhs, t0, t1, y0, rtol, atol, max_step=np.inf, first_step=None):
    """Advance y' = rhs(t, y) from t0 to t1 and return y(t1).

    y0: array of shape (batch, dim) or (dim,).  rhs must accept and return
    arrays of the same shape.  Raises IntegrationFailure on step underflow.
    """
    y = np.atleast_2d(np.asarray(y0, dtype=float)).copy()
    squeeze = np.ndim(y0) == 1
    span = t1 - t0
    if span == 0:
        return y0.copy() if not squeeze else np.asarray(y0, dtype=float).copy()
    direction = np.sign(span)

    t = t0
    k1 = rhs(t, y)
    if first_step is None:
        scale = atol + rtol * np.abs(y)
        d0 = _rms(y / scale)
        d1 = _rms(k1 / scale)
        h = 0.01 * d0 / d1 if d1 > 1e-10 and d0 > 1e-10 else 1e-6 * abs(span)
        h = min(h, abs(span), max_step)
    else:
        h = min(abs(first_step), abs(span), max_step)

    err_prev = 1.0
    h_min = 1e-14 * max(abs(t0), abs(t1), 1.0)
    k = [None] * 7
    while direction * (t1 - t) > 0:
        h = min(h, abs(t1 - t), max_step)
        if h < h_min:
            raise IntegrationFailure(
                f"step size underflow at t={t!r} (h={h!r})", t=t
            )
        hs = direction * h
        k[0] = k1
        for i in range(1, 7):
            yi = y + hs * sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
            k[i] = rhs(t + _C[i] * hs, yi)
        y_new = y + hs * sum(b * k[i] for i, b in enumerate(_B5) if b != 0.0)
        err_vec = hs * sum(e * k[i] for i, e in enumerate(_E) if e != 0.0)

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        # worst batch member controls the shared step
        err = np.max(np.sqrt(np.mean((err_vec / scale) ** 2, axis=-1)))
        if err <= 1.0 or not np.isfinite(err):
            if not np.isfinite(err):
                raise IntegrationFailure(f"non-finite state at t={t!r}", t=t)
            t = t + hs
            y = y_new
            k1 = k[6]  # FSAL
            factor = _SAFETY * err ** (-_KI) * err_prev ** (_KP)
            err_prev = max(err, 1e-10)
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
    return y[0] if squeeze else y


def _rms(a):
    return float(np.sqrt(np.mean(a**2)))
