"""Periodic scale functions b(t) and derived Hill-equation coefficients.

All builtin coefficients are normalized to period 1, so the one-period map
X(1,0) of the associated Hill system is taken literally over [0, 1].
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ParameterError


@dataclass(frozen=True)
class PeriodicCoefficient:
    """A 1-periodic, smooth, positive scale function with two derivatives.

    Immutable after construction; the evaluators are pure and safe to share
    across threads.
    """

    eval: Callable = field(repr=False)
    d1: Callable = field(repr=False)
    d2: Callable = field(repr=False)
    kind: str = "builtin-closed-form"
    period: float = 1.0

    def __call__(self, t):
        return self.eval(t)


def make_builtin(name, **params):
    """Construct a builtin coefficient: 'constant' (c) or 'sqrt-sin' (eps).

    sqrt-sin is b(t) = sqrt(1 + eps*sin(2*pi*t)), eps in (0, 1); period 1.
    """
    if name == "constant":
        c = float(params.pop("c", 1.0))
        if params:
            raise ParameterError(f"unknown parameters for 'constant': {params}")
        if not c > 0:
            raise ParameterError(f"constant coefficient requires c > 0, got c={c}")
        def const(value):
            def f(t):
                if np.isscalar(t):
                    return value
                return np.full(np.shape(t), value)

            return f

        return PeriodicCoefficient(eval=const(c), d1=const(0.0), d2=const(0.0))
    if name == "sqrt-sin":
        eps = float(params.pop("eps", params.pop("epsilon", np.nan)))
        if params:
            raise ParameterError(f"unknown parameters for 'sqrt-sin': {params}")
        if not (0.0 < eps < 1.0):
            raise ParameterError(
                f"sqrt-sin coefficient requires eps in (0, 1), got eps={eps}"
            )
        w = 2.0 * np.pi

        def b(t):
            if np.isscalar(t):
                return math.sqrt(1.0 + eps * math.sin(w * t))
            return np.sqrt(1.0 + eps * np.sin(w * np.asarray(t, dtype=float)))

        def bdot(t):
            if np.isscalar(t):
                return (eps * math.pi * math.cos(w * t)
                        / math.sqrt(1.0 + eps * math.sin(w * t)))
            t = np.asarray(t, dtype=float)
            return eps * np.pi * np.cos(w * t) / np.sqrt(1.0 + eps * np.sin(w * t))

        def bddot(t):
            if np.isscalar(t):
                s, c = math.sin(w * t), math.cos(w * t)
                g = 1.0 + eps * s
                return (-2.0 * eps * math.pi**2 * s / math.sqrt(g)
                        - (eps * math.pi * c) ** 2 / g**1.5)
            t = np.asarray(t, dtype=float)
            s, c = np.sin(w * t), np.cos(w * t)
            g = 1.0 + eps * s
            return (
                -2.0 * eps * np.pi**2 * s / np.sqrt(g)
                - (eps * np.pi * c) ** 2 / g**1.5
            )

        return PeriodicCoefficient(eval=b, d1=bdot, d2=bddot)
    raise ParameterError(f"unknown builtin coefficient {name!r}")


def from_samples(values):
    """Periodic coefficient from >= 256 samples of b over one period.

    `values[i]` is b(i/len(values)); a degree-5 periodic spline supplies the
    evaluator and its analytic derivatives.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 256:
        raise ParameterError(
            f"tabulation must cover one period at >= 256 samples, got {values.size}"
        )
    if not np.all(values > 0):
        raise ParameterError("tabulated coefficient must be positive everywhere")
    ts = np.linspace(0.0, 1.0, values.size + 1)
    vals = np.concatenate([values, values[:1]])
    spl = make_interp_spline(ts, vals, k=5, bc_type="periodic")
    d1 = spl.derivative(1)
    d2 = spl.derivative(2)

    def wrap(s):
        return lambda t: s(np.mod(np.asarray(t, dtype=float), 1.0))

    return PeriodicCoefficient(
        eval=wrap(spl), d1=wrap(d1), d2=wrap(d2), kind="user-tabulated"
    )


@dataclass(frozen=True)
class HillPotential:
    """Coefficients alpha(t) = b(t)^2 and q(t) of the reduced Hill equation

        y'' + (lambda*alpha(t) - q(t))*y = 0.

    q is the zero-order coefficient produced by substituting v = b^{n/2} w
    into the damped wave operator; see `hill_potential`.
    """

    b: PeriodicCoefficient
    n: int

    def alpha(self, t):
        return self.b.eval(t) ** 2

    def q(self, t):
        n = self.n
        r = self.b.d1(t) / self.b.eval(t)
        return (n * n / 4.0 + n / 2.0) * r * r - (n / 2.0) * self.b.d2(t) / self.b.eval(t)

    def q_variant(self, t, which):
        """Alternative printed q formulas, exposed for diagnostics only.

        'intro':      (n/4)(n/4 - 1)(b'/b)^2 - (n/2) b''/b
        'alpha-form': (n/4)[(3/2)(a'/a)^2 - a''/a] - (n/8)(n/2 - 1)(a'/a)^2
                      with a = b^2.
        Neither variant is consistent with the substitution v = b^{n/2} w
        (see the substitution check in the tests); q() is.
        """
        n = self.n
        bv = self.b.eval(t)
        r = self.b.d1(t) / bv
        dd = self.b.d2(t) / bv
        if which == "intro":
            return (n / 4.0) * (n / 4.0 - 1.0) * r * r - (n / 2.0) * dd
        if which == "alpha-form":
            ar = 2.0 * r  # alpha'/alpha
            add = 2.0 * dd + 2.0 * r * r  # alpha''/alpha
            return (n / 4.0) * (1.5 * ar * ar - add) - (n / 8.0) * (
                n / 2.0 - 1.0
            ) * ar * ar
        raise ParameterError(f"unknown q variant {which!r}")


def hill_potential(b, n):
    """Hill potential for scale function b and spatial dimension n >= 1."""
    n = int(n)
    if n < 1:
        raise ParameterError(f"spatial dimension must satisfy n >= 1, got {n}")
    return HillPotential(b=b, n=n)
