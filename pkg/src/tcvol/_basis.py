"""Exact arithmetic on functions of the form Re sum a_j zeta**s_j * log(zeta)**m_j.

Every closed form in the no-trade region (the value function, its adjoint, the
first-order corrections and the Vega) lives in this class, so derivatives,
Euler operators zeta**k d^k and integrals over [L, U] are computed exactly.
"""

from math import factorial

import numpy as np


class QuasiPoly:
    """Real part of a finite sum ``coef * zeta**expo * log(zeta)**logpow``.

    Exponents and coefficients may be complex; evaluation always returns the
    real part, which is how the trigonometric (complex-root) basis is encoded:
    ``zeta**a cos(b log zeta) = Re zeta**(a+ib)`` and
    ``zeta**a sin(b log zeta) = Re(-1j * zeta**(a+ib))``.
    """

    __slots__ = ("coef", "expo", "logpow")

    def __init__(self, coef=(), expo=(), logpow=None):
        self.coef = np.atleast_1d(np.asarray(coef, dtype=complex))
        self.expo = np.atleast_1d(np.asarray(expo, dtype=complex))
        if logpow is None:
            logpow = np.zeros(self.coef.shape, dtype=int)
        self.logpow = np.atleast_1d(np.asarray(logpow, dtype=int))
        if not (self.coef.shape == self.expo.shape == self.logpow.shape):
            raise ValueError("coef, expo and logpow must have equal length")

    @classmethod
    def power(cls, expo, coef=1.0, logpow=0):
        return cls([coef], [expo], [logpow])

    @classmethod
    def zero(cls):
        return cls()

    def __repr__(self):
        parts = [f"{c:.6g}*z^{s:.6g}*log^{m}" for c, s, m in zip(self.coef, self.expo, self.logpow)]
        return "QuasiPoly(" + " + ".join(parts) + ")"

    def __len__(self):
        return self.coef.size

    # -- algebra -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, QuasiPoly):
            return NotImplemented
        return QuasiPoly(
            np.concatenate([self.coef, other.coef]),
            np.concatenate([self.expo, other.expo]),
            np.concatenate([self.logpow, other.logpow]),
        )

    def __neg__(self):
        return QuasiPoly(-self.coef, self.expo, self.logpow)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, QuasiPoly):
            # Re(a) Re(b) = (a b + a conj(b)) / 2
            c1, s1, m1 = (x[:, None] for x in (self.coef, self.expo, self.logpow))
            c2, s2, m2 = (x[None, :] for x in (other.coef, other.expo, other.logpow))
            coef = np.concatenate([(0.5 * c1 * c2).ravel(), (0.5 * c1 * np.conj(c2)).ravel()])
            expo = np.concatenate([(s1 + s2).ravel(), (s1 + np.conj(s2)).ravel()])
            logpow = np.concatenate([(m1 + m2).ravel(), (m1 + m2).ravel()])
            return QuasiPoly(coef, expo, logpow)
        return QuasiPoly(self.coef * float(other), self.expo, self.logpow)

    __rmul__ = __mul__

    def times_power(self, a):
        """Multiply by ``zeta**a`` (real ``a``)."""
        return QuasiPoly(self.coef, self.expo + a, self.logpow)

    def simplify(self, tol=0.0):
        """Merge terms with identical (exponent, log power); drop zeros."""
        keys = {}
        for c, s, m in zip(self.coef, self.expo, self.logpow):
            key = (complex(s), int(m))
            keys[key] = keys.get(key, 0.0) + c
        items = [(c, s, m) for (s, m), c in keys.items() if abs(c) > tol]
        if not items:
            return QuasiPoly()
        c, s, m = zip(*items)
        return QuasiPoly(c, s, m)

    # -- calculus ----------------------------------------------------------

    def derivative(self, order=1):
        out = self
        for _ in range(order):
            c, s, m = out.coef, out.expo, out.logpow
            has_log = m > 0
            out = QuasiPoly(
                np.concatenate([c * s, (c * m)[has_log]]),
                np.concatenate([s - 1, (s - 1)[has_log]]),
                np.concatenate([m, (m - 1)[has_log]]),
            ).simplify()
        return out

    def euler(self, k):
        """The operator ``D_k = zeta**k d^k/dzeta^k``."""
        return self.derivative(k).times_power(k)

    def __call__(self, zeta, order=0):
        f = self.derivative(order) if order else self
        z = np.asarray(zeta, dtype=float)
        if np.any(z <= 0):
            raise ValueError("quasi-polynomials are evaluated on zeta > 0 only")
        eta = np.log(z)[..., None]
        vals = f.coef * np.exp(f.expo * eta) * eta ** f.logpow
        return np.real(vals.sum(axis=-1))

    def integrate(self, lo, hi):
        """Exact integral over ``[lo, hi]`` (``0 < lo < hi``)."""
        a, b = np.log(lo), np.log(hi)
        total = 0.0 + 0.0j
        for c, s, m in zip(self.coef, self.expo, self.logpow):
            total += c * _antiderivative_difference(s + 1.0, int(m), a, b)
        return float(np.real(total))


def _antiderivative_difference(beta, m, a, b):
    """int_a^b eta**m exp(beta*eta) d eta, exactly."""
    if abs(beta) < 1e-14:
        return (b ** (m + 1) - a ** (m + 1)) / (m + 1)

    def prim(eta):
        acc = 0.0
        for j in range(m + 1):
            acc += (-1) ** j * factorial(m) / factorial(m - j) * eta ** (m - j) / beta ** (j + 1)
        return np.exp(beta * eta) * acc

    return prim(b) - prim(a)
