"""Blow-up certificates from Floquet instability plus a finite endpoint.

The construction: pick a spectral parameter inside an instability interval,
seed arbitrarily small data supported on a ball of radius 2M^2, and follow
the exact local solution of the transformed linear equation.  If the
transform G has a finite endpoint, the exponentially growing Floquet mode
pushes G(u) across it before the light cone from the data's edge reaches
the origin, so the solution cannot continue smoothly.

Everything here is checked numerics, not proof: Sobolev norms are computed
(FFT on a torus for n <= 2, semi-analytic radial quadrature for n = 3) and
the crossing time is located on the actual fundamental solution.
"""

import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import floquet
from .errors import (
    ExhaustedSearchError,
    NotApplicableError,
    ParameterError,
    ResolutionError,
)
from .pdesim import GridSpec

_TOP_OCTAVE_BUDGET = 0.01


def chi(z):
    """Radial cutoff: 1 on |z|<=1, smooth bump down to 0 at |z|=2."""
    z = np.asarray(z, dtype=float)
    r = np.sqrt(np.sum(z * z, axis=-1)) if z.ndim else np.abs(z)
    return chi_radial(r)


def chi_radial(r):
    """The cutoff as a function of the radius |z|.

    The transition on (1, 2) is the standard partition-of-unity profile
    g(2-r)/(g(2-r)+g(r-1)) with g(s) = exp(-1/s), which is flat (all
    derivatives vanish) at both ends, so chi is genuinely C-infinity.
    A one-sided bump such as exp(1 - 1/(1-(r-1)^2)) matches the plateau
    only to first order at r = 1 and would have an infinite H^s norm
    for s >= 2.5.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    out[r <= 1.0] = 1.0
    mid = (r > 1.0) & (r < 2.0)
    t = r[mid]
    g_hi = np.exp(-1.0 / (2.0 - t))
    g_lo = np.exp(-1.0 / (t - 1.0))
    out[mid] = g_hi / (g_hi + g_lo)
    return out


@dataclass(frozen=True)
class BlowupPlan:
    """Parameters of one seed-data family.

    n      : spatial dimension
    lam    : spectral parameter (inside an instability interval)
    S      : decay exponent; data size scales like M^-S, must exceed 2n
    M      : integer number of coefficient periods the certificate runs for
    A      : sign (+1/-1) of the oscillatory velocity component
    y      : frequency vector with |y|^2 = lam
    """

    n: int
    lam: float
    S: float
    M: int
    A: float
    y: tuple

    def __post_init__(self):
        if self.M < 1 or self.M != int(self.M):
            raise ParameterError(f"M must be a positive integer, got {self.M}")
        if self.S <= 2 * self.n:
            raise ParameterError(
                f"decay exponent S={self.S} must exceed 2n={2 * self.n}"
            )
        if self.A not in (-1.0, 1.0, -1, 1):
            raise ParameterError(f"A must be +1 or -1, got {self.A}")
        y2 = float(sum(c * c for c in self.y))
        if len(self.y) != self.n or abs(y2 - self.lam) > 1e-9 * max(1.0, self.lam):
            raise ParameterError("frequency vector must satisfy |y|^2 = lambda")

    @property
    def amplitude(self):
        return float(self.M) ** (-self.S)

    @property
    def support_radius(self):
        return 2.0 * self.M**2

    @property
    def cone_radius(self):
        """Radius of the backward light-cone base kept inside the support."""
        return float(self.M) ** 1.5


def default_plan(n, lam, S, M, A=1.0):
    y = [0.0] * n
    y[0] = math.sqrt(lam)
    return BlowupPlan(n=n, lam=lam, S=S, M=int(M), A=float(A), y=tuple(y))


def make_data(plan, tp):
    """Return (u0, u1): callables on point arrays of shape (..., n)."""
    amp = plan.amplitude
    msq = float(plan.M) ** 2
    y = np.asarray(plan.y)

    def u0(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        return amp * chi_radial(r / msq)

    def u1(x):
        x = np.asarray(x, dtype=float)
        base = u0(x)
        phase = np.cos(np.tensordot(x, y, axes=([-1], [0])))
        return plan.A * base * np.exp(-tp.Phi(base)) * phase

    return u0, u1


# ---------------------------------------------------------------------------
# Sobolev smallness
# ---------------------------------------------------------------------------

def _torus_sobolev(values, grid, s):
    """H^s norm of a sampled field on the torus, continuum convention.

    ||u||^2 = (2 pi)^-n * integral (1+|xi|^2)^s |u_hat(xi)|^2 d xi, which on
    the torus becomes L^n * sum_k |c_k|^2 (1 + |xi_k|^2)^s over Fourier
    coefficients c_k at xi_k = 2 pi k / L.
    """
    c = np.fft.fftn(values) / values.size
    k2 = grid.k_squared()
    weight = (1.0 + k2) ** s
    power = np.abs(c) ** 2
    total = grid.L**grid.n * float(np.sum(power * weight))
    # top-octave check: the weighted spectrum must be resolved
    kmax = np.pi / grid.dx
    octave = k2 >= (kmax / 2.0) ** 2
    top = grid.L**grid.n * float(np.sum(power[octave] * weight[octave]))
    if total > 0 and top > _TOP_OCTAVE_BUDGET * total:
        raise ResolutionError(
            f"top-octave energy fraction {top / total:.3g} exceeds "
            f"{_TOP_OCTAVE_BUDGET}; refine the grid"
        )
    return math.sqrt(total)


def sobolev_smallness(u0, u1, s, grid):
    """||u0||_{H^{s+1}} + ||u1||_{H^s} on the given torus grid (FFT path)."""
    pts = grid.coords()
    return _torus_sobolev(u0(pts), grid, s + 1.0) + _torus_sobolev(u1(pts), grid, s)


def _radial_hat(gfun, R, rho, n_r=4096):
    """n=3 radial Fourier transform: g_hat(rho)=4 pi Int g(r) r^2 j0(rho r) dr."""
    r = np.linspace(0.0, R, n_r)
    g = gfun(r)
    # j0(x) = sinc(x/pi) handles rho -> 0 smoothly
    kern = np.sinc(np.outer(rho, r) / np.pi)
    integ = kern * (g * r * r)
    from scipy.integrate import simpson

    return 4.0 * np.pi * simpson(integ, x=r, axis=-1)


def _sphere_mean_weight(s, a, bcoef):
    """Average of (a + b cos theta)^s over the unit sphere in 3-D.

    Equals [(a+b)^{s+1} - (a-b)^{s+1}] / (2 b (s+1)); a > b >= 0 required.
    """
    small = bcoef < 1e-12 * a
    out = np.empty_like(a)
    out[small] = a[small] ** s
    aa, bb = a[~small], bcoef[~small]
    out[~small] = ((aa + bb) ** (s + 1) - (aa - bb) ** (s + 1)) / (
        2.0 * bb * (s + 1.0)
    )
    return out


def radial_pair_norm(g0, g1, lam, s, R, n_rho=2048, n_r=4096):
    """H^{s+1} x H^s norm sum for (g0(|x|), g1(|x|) cos(x.y)) on R^3.

    |y|^2 = lam; both fields are supported in |x| <= R.  Each Sobolev
    integral reduces to a one-dimensional quadrature: g0 via the radial
    transform directly, the modulated g1 via the exact average of
    (1 + |xi|^2)^s over spheres (the shift by +-y enters through the
    sphere-mean weight); the hat-g1(|xi-y|) hat-g1(|xi+y|) cross term is
    bounded by max|hat g1| times the same quadrature and added.
    """
    from scipy.integrate import simpson

    # hat g decays on the scale 2 pi / R; extend until the tail is negligible
    rho_max = 64.0 * 2.0 * np.pi / R
    for _ in range(10):
        rho = np.linspace(1e-9, rho_max, n_rho)
        h0 = _radial_hat(g0, R, rho, n_r)
        tail = np.max(np.abs(h0[-n_rho // 16 :]))
        if tail < 1e-10 * np.max(np.abs(h0)):
            break
        rho_max *= 2.0
    h1 = _radial_hat(g1, R, rho, n_r)

    inv_cube = (2.0 * np.pi) ** -3
    # ||u0||_{s+1}^2 = (2pi)^-3 * 4 pi Int (1+rho^2)^{s+1} h0^2 rho^2 d rho
    norm0_sq = inv_cube * 4.0 * np.pi * float(simpson(
        (1.0 + rho * rho) ** (s + 1.0) * h0 * h0 * rho * rho, x=rho
    ))
    # ||u1||_s^2: hat u1(xi) = (h1(|xi - y|) + h1(|xi + y|)) / 2
    a = 1.0 + lam + rho * rho
    b = 2.0 * math.sqrt(lam) * rho
    ang = _sphere_mean_weight(s, a, b)
    # the two |h1(|xi -+ y|)|^2/4 terms are equal by symmetry; each gives
    # (1/4) Int h1(r)^2 r^2 * 4 pi * ang(r) dr after the sphere average
    main = inv_cube * 2.0 * np.pi * float(simpson(h1 * h1 * rho * rho * ang, x=rho))
    # cross term 2 h1(|xi-y|) h1(|xi+y|)/4: at every xi one of |xi -+ y| is
    # >= |y|, so that factor is bounded by the hat-g1 supremum beyond |y|
    # (with a safety factor); the other integrates against the weight
    if lam > 0:
        wid = 2.0 * np.pi / R
        rho_b = np.linspace(math.sqrt(lam), math.sqrt(lam) + 32.0 * wid, 512)
        h_far = _radial_hat(g1, R, rho_b, n_r)
        far_sup = 1.5 * float(np.max(np.abs(h_far)))
    else:
        far_sup = float(np.max(np.abs(h1)))
    cross_bound = inv_cube * 4.0 * np.pi * far_sup * float(
        simpson(np.abs(h1) * rho * rho * ang, x=rho)
    )
    return math.sqrt(norm0_sq) + math.sqrt(main + cross_bound)


def radial_smallness(plan, tp, s, n_rho=2048, n_r=4096):
    """Semi-analytic smallness for n=3 radial-times-cosine plan data."""
    if plan.n != 3:
        raise ParameterError("radial smallness path is for n = 3")
    amp, msq = plan.amplitude, float(plan.M) ** 2

    def g0(r):
        return amp * chi_radial(r / msq)

    def g1(r):
        base = g0(r)
        return plan.A * base * np.exp(-tp.Phi(base))

    return radial_pair_norm(g0, g1, plan.lam, s, plan.support_radius,
                            n_rho=n_rho, n_r=n_r)


def plan_smallness(plan, tp, s=3.0, grid_points=None):
    """Smallness of the plan's data: radial path for n=3, FFT otherwise."""
    if plan.n == 3:
        return radial_smallness(plan, tp, s)
    L = 2.0 * plan.support_radius * 1.25
    pts = grid_points or (4096 if plan.n == 1 else 1024)
    grid = GridSpec(n=plan.n, L=L, points=pts)
    u0, u1 = make_data(plan, tp)
    return sobolev_smallness(u0, u1, s, grid)


# ---------------------------------------------------------------------------
# Exact local solution and certification
# ---------------------------------------------------------------------------

def exact_local_solution(plan, tp, b, pair):
    """The transformed field v(t, x) inside the influence region.

    v(t,x) = G(M^-S) + A M^-S W(t) (b(t)/b(0))^{n/2} cos(x.y), valid for
    0 <= t <= M and |x| <= M^{3/2} (so the cutoff edge cannot interfere).
    `pair` is the FundamentalPair that fixes the potential, lambda and
    tolerance; W(t) itself is evaluated through the monodromy propagator.
    Returns a callable raising ParameterError outside the valid region.
    """
    pot, tol = pair.pot, pair.tol
    n = pot.n
    amp = plan.amplitude
    g0 = float(tp.G(np.array([amp]))[0])
    y = np.asarray(plan.y)
    b0 = b.eval(0.0)
    m = floquet.monodromy(pot, plan.lam, tol=tol)

    def v(t, x):
        x = np.asarray(x, dtype=float)
        if t < 0.0 or t > plan.M:
            raise ParameterError(f"t={t} outside the certified window [0, {plan.M}]")
        r = np.sqrt(np.sum(x * x, axis=-1))
        if np.any(r > plan.cone_radius * (1.0 + 1e-12)):
            raise ParameterError("point outside the certified influence region")
        w, _ = floquet.propagate(m, pot, plan.lam, t, (0.0, 1.0), tol=tol)
        scale = (b.eval(t) / b0) ** (n / 2.0)
        phase = np.cos(np.tensordot(x, y, axes=([-1], [0])))
        return g0 + plan.A * amp * w * scale * phase

    return v


@dataclass
class BlowupCertificate:
    plan: BlowupPlan
    smallness: float
    delta: float
    endpoint: float  # the finite endpoint the trajectory crosses
    t_star: float
    mu0: float
    b21: float
    predicted_v_M: float  # closed-form v(M, 0)
    trajectory: list  # [(t, v(t, 0)), ...] at integer and half-integer t
    s: float

    def to_json(self):
        return json.dumps(
            {
                "S": self.plan.S,
                "M": self.plan.M,
                "A": self.plan.A,
                "lambda": self.plan.lam,
                "y": list(self.plan.y),
                "mu0": self.mu0,
                "b21": self.b21,
                "b_G": self.endpoint,
                "t_star": self.t_star,
                "smallness": self.smallness,
                "delta": self.delta,
                "sobolev_order": self.s,
                "predicted_v_M": self.predicted_v_M,
                "trajectory": [[t, v] for t, v in self.trajectory],
            },
            indent=2,
        )


def _origin_value(m, pot, plan, g0, b0, t, tol):
    w, _ = floquet.propagate(m, pot, plan.lam, t, (0.0, 1.0), tol=tol)
    scale = (pot.b.eval(t) / b0) ** (pot.n / 2.0)
    return float(g0 + plan.A * plan.amplitude * w * scale)


def certify_blowup(tp, pot, lam_range, delta, S=None, s=3.0, M_max=256,
                   tol=1e-11, grid_points=None):
    """Find the smallest M whose plan both stays under delta and crosses.

    Raises NotApplicableError when the transform has no finite endpoint
    (so this construction certifies nothing), ExhaustedSearchError when no
    M <= M_max works.
    """
    ep = tp.endpoints()
    if ep.b_finite:
        target, direction = ep.b, 1.0
    elif ep.a_finite:
        target, direction = ep.a, -1.0
    else:
        raise NotApplicableError(
            "both transform endpoints are infinite: the global-existence "
            "condition holds and no blow-up is certified"
        )
    n = pot.n
    if S is None:
        S = 2.0 * n + 0.5
    intervals = floquet.scan_instability(pot, lam_range, grid_points=400, tol=tol)
    if not intervals:
        raise ExhaustedSearchError(
            "no instability interval in the requested range", best=None
        )
    lam, m = floquet.find_good_lambda(intervals, pot, tol=tol)
    pair = floquet.classify(m)
    mu_exp = pair.expanding  # signed; |mu_exp| = mu0 > 1
    b0 = pot.b.eval(0.0)

    def growth_ok(M):
        """True when |A M^-S W(M)| can reach from G(M^-S) to the endpoint."""
        vals = floquet.multi_period_values(m, M)
        if vals.W == 0.0:
            return False, vals, None
        term_log10 = -S * math.log10(M) + math.log10(abs(vals.W)) + vals.log10_scale
        g0 = float(tp.G(np.array([float(M) ** (-S)]))[0])
        return term_log10 >= math.log10(abs(target - g0)), vals, g0

    def smallness_at(M):
        vals = floquet.multi_period_values(m, M)
        plan = default_plan(n, lam, S, M,
                            A=direction * math.copysign(1.0, vals.W))
        return plan, plan_smallness(plan, tp, s=s, grid_points=grid_points)

    m_growth = None
    deficit = None
    for M in range(1, M_max + 1):
        ok, vals, g0 = growth_ok(M)
        if ok:
            m_growth = M
            break
        deficit = (M, vals)
    if m_growth is None:
        raise ExhaustedSearchError(
            f"growth never reaches the endpoint for M <= {M_max}", best=deficit
        )
    # smallness decreases in M at fixed S, so binary-search the onset
    plan, small = smallness_at(m_growth)
    if small > delta:
        lo = m_growth  # fails
        plan_hi, small_hi = smallness_at(M_max)
        if small_hi > delta:
            raise ExhaustedSearchError(
                f"smallness {small_hi!r} at M={M_max} still exceeds "
                f"delta={delta!r}", best=(M_max, small_hi)
            )
        hi, plan, small = M_max, plan_hi, small_hi
        while hi - lo > 1:
            mid = (lo + hi) // 2
            plan_mid, small_mid = smallness_at(mid)
            if small_mid <= delta:
                hi, plan, small = mid, plan_mid, small_mid
            else:
                lo = mid
        ok, _, g0 = growth_ok(plan.M)
        if not ok:  # cannot happen once growth is monotone; guard anyway
            raise ExhaustedSearchError(
                "growth check failed at the smallness onset", best=(plan.M, small)
            )

    # trajectory at integer and half-integer times, then first crossing
    margin = abs(target) * 1e-9
    crossed = (lambda v: v >= target - margin) if direction > 0 else (
        lambda v: v <= target + margin
    )
    trajectory = []
    hit = None
    for k in range(2 * plan.M + 1):
        t = k / 2.0
        v = _origin_value(m, pot, plan, g0, b0, t, tol)
        trajectory.append((t, v))
        if hit is None and crossed(v):
            hit = t
    if hit is None:
        raise ExhaustedSearchError(
            "trajectory failed to cross the endpoint despite the growth "
            "estimate; numerical inconsistency", best=best
        )
    lo = max(0.0, hit - 0.5)
    hi = hit
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if crossed(_origin_value(m, pot, plan, g0, b0, mid, tol)):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    t_star = hi
    vals = floquet.multi_period_values(m, plan.M)
    predicted = g0 + plan.A * plan.amplitude * vals.W * 10.0**vals.log10_scale
    return BlowupCertificate(
        plan=plan, smallness=small, delta=delta, endpoint=target,
        t_star=t_star, mu0=abs(mu_exp), b21=m.b21, predicted_v_M=predicted,
        trajectory=trajectory, s=s,
    )


def export_certificate(path, cert):
    tmp = tempfile.NamedTemporaryFile(
        "w", dir=os.path.dirname(os.path.abspath(path)) or ".", delete=False
    )
    try:
        tmp.write(cert.to_json())
        tmp.close()
        os.replace(tmp.name, path)
    except BaseException:
        tmp.close()
        os.unlink(tmp.name)
        raise
