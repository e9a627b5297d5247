"""Target-manifold metrics, Christoffel symbols, geodesics and curvature.

A MetricChart supplies h(u) and its partial derivatives; everything else
(Christoffel symbols, the straight-line self-coherence test, geodesic
integration, 2-D conformal Gaussian curvature) is computed from those.
"""

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure, ParameterError, SingularMetricError

_FD_STEP = 1e-4
_CHART_BOUND = 1e6


def _fd_grad(fn, u, step=_FD_STEP):
    """4th-order central difference gradient of a scalar or matrix function."""
    u = np.asarray(u, dtype=float)
    out = []
    for k in range(u.size):
        e = np.zeros_like(u)
        e[k] = step
        out.append(
            (
                -fn(u + 2 * e) + 8 * fn(u + e) - 8 * fn(u - e) + fn(u - 2 * e)
            ) / (12 * step)
        )
    return out


class MetricChart:
    """Riemannian metric in a global chart on R^m (or an open subset).

    h(u) returns the m x m matrix; dh(u, k) its partial derivative with
    respect to u^k.  Subclasses with closed-form h provide analytic
    derivatives; the generic fallback is 4th-order central differences.
    """

    family = "custom"

    def __init__(self, m, h, dh=None, domain=None):
        self.m = int(m)
        self._h = h
        self._dh = dh
        self.domain = domain  # optional predicate u -> bool

    def h(self, u):
        return np.asarray(self._h(np.asarray(u, dtype=float)), dtype=float)

    def dh(self, u, k):
        if self._dh is not None:
            return np.asarray(self._dh(np.asarray(u, dtype=float), k), dtype=float)
        return _fd_grad(self.h, u)[k]

    def in_domain(self, u):
        return True if self.domain is None else bool(self.domain(np.asarray(u)))


class ConformalMetric(MetricChart):
    """h_ij(u) = hscalar(u) * delta_ij."""

    family = "conformal"

    def __init__(self, m, hscalar, grad=None, laplacian_log=None, domain=None):
        self.hscalar = hscalar
        self.grad_hscalar = grad
        self.laplacian_log = laplacian_log  # analytic Laplacian of ln hscalar
        super().__init__(m, h=None, domain=domain)

    def h(self, u):
        return self.hscalar(np.asarray(u, dtype=float)) * np.eye(self.m)

    def dh(self, u, k):
        u = np.asarray(u, dtype=float)
        if self.grad_hscalar is not None:
            g = self.grad_hscalar(u)[k]
        else:
            g = _fd_grad(self.hscalar, u)[k]
        return g * np.eye(self.m)


def conformal_power(alpha, powers=(2, 2)):
    """Conformal factor h = (1 + sum_i u_i^{p_i})^alpha with even p_i."""
    powers = tuple(int(p) for p in powers)
    if any(p < 2 or p % 2 for p in powers):
        raise ParameterError(f"powers must be even integers >= 2, got {powers}")
    m = len(powers)
    p = np.array(powers, dtype=float)

    def base(u):
        return 1.0 + np.sum(np.asarray(u, dtype=float) ** p)

    def hs(u):
        return base(u) ** alpha

    def grad(u):
        u = np.asarray(u, dtype=float)
        return alpha * base(u) ** (alpha - 1.0) * p * u ** (p - 1.0)

    def lap_log(u):
        # Laplacian of alpha*ln(1 + sum u_i^p_i)
        u = np.asarray(u, dtype=float)
        s = base(u)
        d1 = p * u ** (p - 1.0)
        d2 = p * (p - 1.0) * u ** (p - 2.0)
        return alpha * float(np.sum(d2 / s - (d1 / s) ** 2))

    metric = ConformalMetric(m, hs, grad=grad, laplacian_log=lap_log)

    def ray_log_derivative(a):
        """Vectorized d/dt ln h(t*a) for the ray through direction a."""
        a = np.asarray(a, dtype=float)
        ap = a**p

        def f(t):
            t = np.asarray(t, dtype=float)
            num = alpha * np.sum(p * ap * t[..., None] ** (p - 1.0), axis=-1)
            den = 1.0 + np.sum(ap * t[..., None] ** p, axis=-1)
            return num / den

        return f

    metric.ray_log_derivative = ray_log_derivative
    return metric


def half_plane_power(ell):
    """Conformal factor h = (1 + v)^{-ell} on the half-plane v > -1."""
    ell = float(ell)

    def hs(u):
        return (1.0 + u[1]) ** (-ell)

    def grad(u):
        return np.array([0.0, -ell * (1.0 + u[1]) ** (-ell - 1.0)])

    def lap_log(u):
        return ell / (1.0 + u[1]) ** 2

    metric = ConformalMetric(
        2, hs, grad=grad, laplacian_log=lap_log, domain=lambda u: u[1] > -1.0
    )

    def ray_log_derivative(a):
        a = np.asarray(a, dtype=float)
        a2 = float(a[1])

        def f(t):
            t = np.asarray(t, dtype=float)
            return -ell * a2 / (1.0 + a2 * t)

        return f

    metric.ray_log_derivative = ray_log_derivative
    return metric


class DiagonalPerturbedMetric(MetricChart):
    """h_ik(u) = hscalar(u) * (delta_ik + H_ik(u)) with ||H|| < 1."""

    family = "diagonal-perturbed"

    def __init__(self, m, hscalar, H, grad=None, domain=None):
        self.hscalar = hscalar
        self.grad_hscalar = grad
        self.H = H
        super().__init__(m, h=None, domain=domain)

    def h(self, u):
        u = np.asarray(u, dtype=float)
        return self.hscalar(u) * (np.eye(self.m) + np.asarray(self.H(u), dtype=float))

    def dh(self, u, k):
        return _fd_grad(self.h, u)[k]


@dataclass(frozen=True)
class ChristoffelValue:
    u: np.ndarray
    gamma: np.ndarray  # gamma[i, j, k] = Gamma^i_{jk}


def christoffel(M, u):
    """Gamma^i_{jk} = (1/2) h^{il} (d_j h_{kl} + d_k h_{jl} - d_l h_{kj})."""
    u = np.asarray(u, dtype=float)
    if not M.in_domain(u):
        raise ParameterError(f"point {u.tolist()} is outside the chart domain")
    h = M.h(u)
    dh = np.stack([M.dh(u, k) for k in range(M.m)])  # dh[l, :, :] = d_l h
    try:
        hinv = np.linalg.inv(h)
        cond = np.linalg.cond(h)
        if cond > 1e12 or not np.all(np.isfinite(hinv)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        raise SingularMetricError(
            f"metric singular at u={u.tolist()}",
            cond=float(np.linalg.cond(h)), at=u,
        ) from None
    # dh[j, k, l] = d_j h_{kl}; expr[j, k, l] = d_j h_{kl} + d_k h_{jl} - d_l h_{kj}
    expr = dh + dh.transpose(1, 0, 2) - dh.transpose(2, 1, 0)
    gamma = 0.5 * np.einsum("il,jkl->ijk", hinv, expr)
    return ChristoffelValue(u=u, gamma=gamma)


@dataclass(frozen=True)
class DistinguishedLine:
    a: np.ndarray
    f_samples: list  # [(t, f(t)), ...]
    max_residual: float

    def f_interp(self, t):
        ts = np.array([s[0] for s in self.f_samples])
        fs = np.array([s[1] for s in self.f_samples])
        return np.interp(t, ts, fs)


def check_self_coherence(M, a, t_range, samples=64):
    """Test whether the ray u = a*t is covered by geodesics.

    At each t the quadratic form c_i(t) = sum_jk Gamma^i_{jk}(a t) a_j a_k
    must be proportional to a; f(t) is the least-squares proportionality
    factor and max_residual the worst deviation |c_i - a_i f|.
    """
    a = np.asarray(a, dtype=float)
    if int(samples) < 16:
        raise ParameterError(f"need samples >= 16, got {samples}")
    if not np.any(a != 0.0):
        raise ParameterError("direction a must be nonzero")
    ts = np.linspace(t_range[0], t_range[1], int(samples))
    norm2 = float(a @ a)
    out = []
    worst = 0.0
    for t in ts:
        u = a * t
        if not M.in_domain(u):
            raise ParameterError(f"line leaves the metric domain at t={t}")
        gamma = christoffel(M, u).gamma
        c = np.einsum("ijk,j,k->i", gamma, a, a)
        f_t = float(a @ c) / norm2
        worst = max(worst, float(np.max(np.abs(c - a * f_t))))
        out.append((float(t), f_t))
    return DistinguishedLine(a=a, f_samples=out, max_residual=worst)


@dataclass(frozen=True)
class GeodesicPath:
    samples: list  # [(s, u, udot), ...]
    speed: float
    truncated: bool = False

    def csv_rows(self):
        for s, u, du in self.samples:
            yield [s, *u.tolist(), *du.tolist()]


def geodesic_full(M, u0, v0, s_max, tol=1e-10, n_samples=200):
    """Integrate the full geodesic system; h-speed conservation is checked."""
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if not np.any(v0 != 0.0):
        raise ParameterError("initial velocity must be nonzero")
    m = M.m

    def rhs(s, y):
        u, du = y[:m], y[m:]
        gamma = christoffel(M, u).gamma
        acc = -np.einsum("ijk,j,k->i", gamma, du, du)
        return np.concatenate([du, acc])

    def escape(s, y):
        return _CHART_BOUND - float(np.max(np.abs(y[:m])))

    escape.terminal = True
    ss = np.linspace(0.0, s_max, n_samples)
    sol = solve_ivp(
        rhs, (0.0, s_max), np.concatenate([u0, v0]), method="DOP853",
        rtol=tol, atol=tol, t_eval=ss, events=escape,
    )
    if not sol.success and sol.status != 1:
        raise IntegrationFailure(f"geodesic integration failed: {sol.message}")
    samples = [
        (float(s), sol.y[:m, i].copy(), sol.y[m:, i].copy())
        for i, s in enumerate(sol.t)
    ]
    speed0 = float(v0 @ M.h(u0) @ v0)
    return GeodesicPath(samples=samples, speed=speed0, truncated=sol.status == 1)


def h_speed_drift(M, path):
    """Max relative drift of the h-speed along a path (posterior check)."""
    worst = 0.0
    for _, u, du in path.samples:
        sp = float(du @ M.h(u) @ du)
        worst = max(worst, abs(sp - path.speed) / abs(path.speed))
    return worst


def geodesic_reduced(f, xi_hat, s_max, tol=1e-10, u_init=0.0, n_samples=200):
    """Integrate the scalar reduced geodesic u'' + f(u) u'^2 = 0.

    xi_hat is the initial chart speed (from the unit-speed relation when
    called out of the distinguished-line workflow).
    """
    if xi_hat == 0.0:
        raise ParameterError("xi_hat must be nonzero")

    def rhs(s, y):
        return [y[1], -f(y[0]) * y[1] ** 2]

    def escape(s, y):
        return _CHART_BOUND - abs(y[0])

    escape.terminal = True
    ss = np.linspace(0.0, s_max, n_samples)
    sol = solve_ivp(
        rhs, (0.0, s_max), [u_init, xi_hat], method="DOP853",
        rtol=tol, atol=tol, t_eval=ss, events=escape,
    )
    if not sol.success and sol.status != 1:
        raise IntegrationFailure(f"reduced geodesic failed: {sol.message}")
    return [(float(s), float(sol.y[0, i]), float(sol.y[1, i])) for i, s in enumerate(sol.t)]


def gaussian_curvature(M, u):
    """K = -(1/h) * Laplacian(ln h) for a 2-D conformal chart."""
    if not isinstance(M, ConformalMetric) or M.m != 2:
        raise ParameterError("Gaussian curvature requires a 2-D conformal metric")
    u = np.asarray(u, dtype=float)
    if M.laplacian_log is not None:
        lap = M.laplacian_log(u)
    else:
        def loh(x):
            return math.log(M.hscalar(x))

        step = _FD_STEP
        lap = 0.0
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            lap += (
                -loh(u + 2 * e) + 16 * loh(u + e) - 30 * loh(u)
                + 16 * loh(u - e) - loh(u - 2 * e)
            ) / (12 * step**2)
    return -lap / M.hscalar(u)


def export_path_csv(path, geo, m):
    """CSV export: s,u1,...,um,du1,...,dum (17 significant digits)."""
    tmp = tempfile.NamedTemporaryFile(
        "w", dir=os.path.dirname(os.path.abspath(path)) or ".",
        delete=False, newline="",
    )
    try:
        writer = csv.writer(tmp)
        writer.writerow(
            ["s"] + [f"u{i+1}" for i in range(m)] + [f"du{i+1}" for i in range(m)]
        )
        for row in geo.csv_rows():
            writer.writerow([f"{x:.17g}" for x in row])
        tmp.close()
        os.replace(tmp.name, path)
    except BaseException:
        tmp.close()
        os.unlink(tmp.name)
        raise
