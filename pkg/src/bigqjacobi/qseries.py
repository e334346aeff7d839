"""q-shifted factorials, theta products and basic hypergeometric series.

All routines accept numpy arrays and broadcast, so a whole grid of spectral
parameters can be pushed through one call.  Infinite products are accumulated
in a (mantissa, binary exponent) representation, which keeps quotients of huge
products finite as long as the quotient itself is.
"""

from dataclasses import dataclass
import math

import numpy as np

__all__ = [
    "QSeriesError", "DomainError", "ConvergenceError", "PoleError",
    "SeriesResult", "check_base", "qpoch_finite", "qpoch_inf",
    "qpoch_inf_ratio", "theta", "theta_shift", "theta_ratio", "phi_series",
    "is_q_power", "EPS",
]

EPS = np.finfo(float).eps
_LN2 = math.log(2.0)


class QSeriesError(Exception):
    """Base class of all errors raised by this package."""


class DomainError(QSeriesError, ValueError):
    """An argument lies outside the domain of the requested expression."""


class ConvergenceError(QSeriesError, ArithmeticError):
    """A series or limit did not converge."""


class PoleError(DomainError):
    """A denominator factor vanishes.

    ``factor`` names the vanishing factor so that callers computing residues
    know which term is simple.
    """

    def __init__(self, message, factor=None):
        super().__init__(message)
        self.factor = factor


@dataclass(frozen=True)
class SeriesResult:
    """Value of a q-series with a truncation error bound.

    ``magnitude`` is the sum of the moduli of the summed terms.  It is not part
    of the truncation bound but measures cancellation, ``EPS * magnitude``
    being a realistic rounding error.
    """

    value: complex
    err_estimate: float
    n_terms: int
    magnitude: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.err_estimate) < 0):
            raise ValueError("err_estimate must be non-negative")
        if np.any(np.asarray(self.n_terms) < 0):
            raise ValueError("n_terms must be non-negative")

    def __complex__(self):
        return complex(self.value)


def check_base(q):
    """Return ``q`` as a float after checking ``0 < q < 1``."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"base must satisfy 0 < q < 1, got q={q}")
    return q


def is_q_power(x, q, tol=1e-9):
    """Return the integer k with ``x = q**k`` (within ``tol`` in log-q units), else None."""
    x = complex(x)
    if x.real <= 0 or abs(x.imag) > tol * abs(x):
        return None
    k = math.log(x.real) / math.log(q)
    kr = round(k)
    return int(kr) if abs(k - kr) < tol else None


def qpoch_finite(x, q, n):
    """(x;q)_n for integer n >= 0."""
    q = check_base(q)
    n = int(n)
    if n < 0:
        raise DomainError("qpoch_finite needs n >= 0")
    x = np.asarray(x, dtype=complex)
    out = np.ones_like(x)
    for j in range(n):
        out = out * (1.0 - x * q**j)
    return out[()] if out.ndim == 0 else out


class _Scaled:
    """Complex number stored as mantissa * 2**exponent."""

    __slots__ = ("m", "e")

    def __init__(self, m=1.0, e=0):
        self.m = np.asarray(m, dtype=complex)
        self.e = np.asarray(e, dtype=np.int64)

    def _renorm(self):
        mag = np.abs(self.m)
        ok = np.isfinite(mag) & (mag > 0)
        _, ex = np.frexp(np.where(ok, mag, 1.0))
        ex = np.where(ok, ex, 0).astype(np.int64)
        self.m = _ldexp(self.m, -ex)
        self.e = self.e + ex

    def mul(self, v):
        self.m = self.m * v
        self._renorm()
        return self

    def div(self, v):
        self.m = self.m / v
        self._renorm()
        return self

    def mul_scaled(self, other, power=1):
        if power == 1:
            self.m = self.m * other.m
            self.e = self.e + other.e
        else:
            self.m = self.m / other.m
            self.e = self.e - other.e
        self._renorm()
        return self

    def mul_exp(self, log_factor):
        """Multiply by exp(log_factor) for a possibly huge real part."""
        lf = np.asarray(log_factor, dtype=complex)
        big = np.floor(lf.real / _LN2)
        self.m = self.m * np.exp(lf - big * _LN2)
        self.e = self.e + big.astype(np.int64)
        self._renorm()
        return self

    def value(self):
        e = np.clip(self.e, -100000, 100000)
        out = _ldexp(self.m, e)
        return out[()] if out.ndim == 0 else out


def _ldexp(m, e):
    e = np.asarray(e).astype(np.int32)
    out = np.empty(np.broadcast_shapes(np.shape(m), e.shape), dtype=complex)
    with np.errstate(over="ignore"):
        out.real = np.ldexp(m.real, e)
        out.imag = np.ldexp(m.imag, e)
    return out


def _n_factors(absmax, q):
    """Number of factors of (x;q)_inf needed before |x q^j| drops below an ulp."""
    base = math.ceil(math.log(EPS) / math.log(q)) + 64
    if absmax > 1.0:
        base += math.ceil(math.log(absmax) / -math.log(q))
    return base


def _poch_scaled(num, den, q):
    """prod over j of prod(1 - u q^j) / prod(1 - v q^j) as a _Scaled value."""
    num = [np.asarray(u, dtype=complex) for u in num]
    den = [np.asarray(v, dtype=complex) for v in den]
    args = num + den
    if not args:
        return _Scaled(), 0.0
    absmax = max(float(np.max(np.abs(u))) if u.size else 0.0 for u in args)
    nf = _n_factors(absmax, q)
    qpow = q ** np.arange(nf, dtype=float)
    shape = np.broadcast_shapes(*(u.shape for u in args))
    qpow = qpow.reshape((nf,) + (1,) * len(shape))
    fac = np.ones((nf,) + shape, dtype=complex)
    for u in num:
        fac = fac * (1.0 - u * qpow)
    for v in den:
        fac = fac / (1.0 - v * qpow)
    # split every factor as mantissa * 2**e: mantissas lie in [0.5, 1), so their
    # product cannot overflow and stays above 2**-nf
    mag = np.abs(fac)
    ok = np.isfinite(mag) & (mag > 0)
    _, ex = np.frexp(np.where(ok, mag, 1.0))
    ex = np.where(ok, ex, 0)
    mant = _ldexp(fac, -ex)
    acc = _Scaled(np.prod(mant, axis=0), np.sum(ex, axis=0, dtype=np.int64))
    acc._renorm()
    qj = q**nf
    tail = sum(np.abs(u) for u in args) * qj / (1.0 - q)
    return acc, tail


def qpoch_inf(x, q):
    """(x;q)_inf with a tail bound from the log-product remainder."""
    q = check_base(q)
    acc, tail = _poch_scaled([x], [], q)
    val = acc.value()
    return SeriesResult(val, np.abs(val) * tail, _n_factors(float(np.max(np.abs(x))), q))


def qpoch_inf_ratio(num, den, q):
    """prod (u;q)_inf over ``num`` divided by prod (v;q)_inf over ``den``.

    Returns the plain value.  Numerator and denominator are accumulated
    factor by factor, so ratios of individually overflowing products are fine.
    A vanishing denominator raises :class:`PoleError`.
    """
    q = check_base(q)
    for v in den:
        _check_poch_pole(v, q)
    acc, _ = _poch_scaled(num, den, q)
    return acc.value()


def _check_poch_pole(v, q, tol=1e-14):
    v = np.asarray(v, dtype=complex)
    # (v;q)_inf = 0 iff v = q^{-j} for some j >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(v) / math.log(q)
    kr = np.round(k.real)
    bad = (np.abs(k - kr) < tol) & (kr <= 0) & (v != 0)
    if np.any(bad):
        raise PoleError(f"(v;q)_inf vanishes for v={v[bad].ravel()[0]}", factor=("poch", complex(v[bad].ravel()[0])))


def _theta_scaled(x, q):
    """theta(x) as a _Scaled value, reducing x to the annulus q < |x| <= 1 first."""
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise DomainError("theta(x) needs x != 0")
    k = np.floor(np.log(np.abs(x)) / math.log(q)).astype(np.int64)
    x0 = x / q**k.astype(float)
    # guard the annulus edges against rounding of the log
    hi = np.abs(x0) > 1.0
    k = np.where(hi, k + 1, k)
    x0 = np.where(hi, x0 / q, x0)
    lo = np.abs(x0) <= q
    k = np.where(lo, k - 1, k)
    x0 = np.where(lo, x0 * q, x0)
    acc, _ = _poch_scaled([x0, q / x0], [], q)
    kf = k.astype(float)
    acc.mul_exp(-kf * (kf - 1) / 2 * math.log(q) - kf * np.log(-x0 + 0j))
    return acc


def theta(x, q):
    """Renormalized Jacobi theta product (x;q)_inf (q/x;q)_inf.

    ``x`` may be a tuple ``(x1, ..., xr)``, in which case the product of the
    individual theta values is returned.
    """
    q = check_base(q)
    xs = x if isinstance(x, (tuple, list)) else (x,)
    acc = _Scaled()
    for xi in xs:
        acc.mul_scaled(_theta_scaled(xi, q))
    val = acc.value()
    return SeriesResult(val, np.abs(val) * 4 * EPS, _n_factors(1.0, q))


def theta_ratio(num, den, q):
    """prod theta(u) over ``num`` divided by prod theta(v) over ``den``."""
    q = check_base(q)
    acc = _Scaled()
    for u in num:
        acc.mul_scaled(_theta_scaled(u, q))
    for v in den:
        t = _theta_scaled(v, q)
        if np.any(t.m == 0):
            raise PoleError(f"theta({complex(np.ravel(v)[0])}) vanishes in a denominator", factor=("theta", v))
        acc.mul_scaled(t, power=-1)
    return acc.value()


def theta_shift(x, q, k):
    """theta(q^k x) from theta(x) and the quasi-periodicity factor.

    The factor is q^{-k(k-1)/2} (-x)^{-k}, valid for every integer k.
    """
    q = check_base(q)
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise DomainError("theta_shift needs x != 0")
    k = int(k)
    base = theta(x, q).value
    return base * q ** (-k * (k - 1) / 2) * (-x) ** (-k)


_NOSTOP = 1 << 40


def _terminating_index(u, q, tol=1e-9):
    """Per element: m if u = q^{-m} with m >= 0 integer, else a huge sentinel."""
    u = np.asarray(u, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(u) / math.log(q)
    kr = np.round(k.real)
    hit = (np.abs(k - kr) < tol) & (kr <= 0) & (u != 0)
    return np.where(hit, -np.where(hit, kr, 0), _NOSTOP).astype(np.int64)


def phi_series(upper, lower, q, arg, tol=1e-13, max_terms=4000, raise_on_fail=True):
    r"""Basic hypergeometric series :math:`{}_r\phi_s`.

    Parameters
    ----------
    upper, lower : sequences of complex scalars or arrays
        Numerator and denominator parameters.  Arrays broadcast together.
    q : float
        Base, 0 < q < 1.
    arg : complex or array
        Series argument.
    tol : float
        Relative truncation tolerance.
    raise_on_fail : bool
        When False, elements that fail to converge get ``err_estimate = inf``
        instead of raising.

    Returns
    -------
    SeriesResult
        ``value``, truncation bound ``err_estimate`` (zero for terminating
        elements), the number of terms and the absolute term sum.
    """
    q = check_base(q)
    upper = [np.asarray(u, dtype=complex) for u in upper]
    lower = [np.asarray(v, dtype=complex) for v in lower]
    arg = np.asarray(arg, dtype=complex)
    shape = np.broadcast_shapes(arg.shape, *(u.shape for u in upper), *(v.shape for v in lower))
    upper = [np.broadcast_to(u, shape) for u in upper]
    lower = [np.broadcast_to(v, shape) for v in lower]
    arg = np.broadcast_to(arg, shape)
    expo = 1 + len(lower) - len(upper)

    stop = np.full(shape, _NOSTOP, dtype=np.int64)
    for u in upper:
        stop = np.minimum(stop, _terminating_index(u, q))
    terminating = stop < _NOSTOP
    if expo < 0 and not np.all(terminating):
        raise ConvergenceError("series with r > s+1 diverges unless it terminates")
    if expo == 0:
        bad = (~terminating) & (np.abs(arg) >= 1.0)
        if np.any(bad):
            if raise_on_fail:
                raise ConvergenceError(f"|arg| >= 1 for a non-terminating series (arg={arg[bad].ravel()[0]})")

    term = np.ones(shape, dtype=complex)
    total = np.ones(shape, dtype=complex)
    mag = np.ones(shape)
    done = terminating & (stop == 0)
    err = np.zeros(shape)
    nterm = np.ones(shape, dtype=np.int64)
    small_run = np.zeros(shape, dtype=np.int64)
    ratios = [np.zeros(shape), np.zeros(shape), np.zeros(shape)]
    failed = np.zeros(shape, dtype=bool)
    if expo == 0 and not raise_on_fail:
        failed = (~terminating) & (np.abs(arg) >= 1.0)
        done = done | failed

    qn = 1.0
    n = 0
    while not np.all(done):
        if n >= max_terms:
            if raise_on_fail:
                raise ConvergenceError(f"series did not converge in {max_terms} terms")
            failed |= ~done
            break
        num = arg * ((-qn) ** expo if expo else 1.0)
        for u in upper:
            num = num * (1.0 - u * qn)
        den = np.full(shape, 1.0 - qn * q, dtype=complex)
        for v in lower:
            f = 1.0 - v * qn
            tiny = (np.abs(f) < 1e-300) & ~done
            if np.any(tiny):
                raise DomainError(f"lower parameter {v[tiny].ravel()[0]} is a non-positive power of q")
            den = den * f
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ratio = num / den
        ratio = np.where(terminating & (n + 1 > stop), 0.0, ratio)
        ratio = np.where(done, 0.0, ratio)
        with np.errstate(over="ignore", invalid="ignore"):
            term = term * ratio
        if not np.all(np.isfinite(term[~done])):
            if raise_on_fail:
                raise ConvergenceError("series terms overflowed")
            blown = ~np.isfinite(term) & ~done
            failed |= blown
            done = done | blown
            term = np.where(blown, 0.0, term)
        total = total + np.where(done, 0.0, term)
        mag = mag + np.where(done, 0.0, np.abs(term))
        nterm = nterm + (~done)
        ratios = [ratios[1], ratios[2], np.abs(ratio)]
        n += 1
        qn *= q

        fin_term = terminating & (n >= stop) & ~done
        done = done | fin_term

        absS = np.maximum(np.abs(total), 1e-300)
        small = np.abs(term) < tol * absS
        small_run = np.where(small, small_run + 1, 0)
        rho = np.maximum(np.maximum(ratios[0], ratios[1]), ratios[2])
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(rho < 1.0, np.abs(term) * rho / (1.0 - rho), np.inf)
        conv = (small_run >= 3) & (tail < tol * absS) & ~done & ~terminating
        err = np.where(conv, tail, err)
        done = done | conv

    err = np.where(failed, np.inf, err)
    err = np.where(terminating, 0.0, err)
    val = total[()] if total.ndim == 0 else total
    return SeriesResult(val, err[()] if err.ndim == 0 else err,
                        int(np.max(nterm)) if nterm.size else 0,
                        mag[()] if mag.ndim == 0 else mag)
