"""c-functions, connection coefficients and closed-form Wronskians.

The ``*_raw`` functions work on plain floats and broadcast over arrays of
spectral parameters; they are shared with :mod:`bigqjacobi.eigen`, which
needs c(gamma) for its connection-formula route.
"""

from dataclasses import dataclass
import math

import numpy as np

from .lattice import POS, const_K
from .qseries import (PoleError, _poch_scaled, _theta_scaled, qpoch_inf, theta, theta_shift,
                      qpoch_inf_ratio, theta_ratio)
from . import eigen as _eigen

__all__ = [
    "c_raw", "K_raw", "c_function", "ctilde_function", "connection_expand", "wronskian_psi_phi_closed",
    "K_coefficients", "wronskian_Phi_pair", "W_gamma", "ConnectionData", "connection_data",
    "matrix_identity_residual",
]

SNAP = 1e-10


def _near_qpower(u, q, nonpositive_only):
    """Mask of u within SNAP (log-q units) of q^j; j <= 0 only if requested."""
    u = np.asarray(u, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(u) / math.log(q)
    kr = np.round(k.real)
    hit = (np.abs(k - kr) < SNAP) & (u != 0)
    if nonpositive_only:
        hit &= kr <= 0
    return hit


def _pole_guard(mask, what, raise_pole):
    if np.any(mask) and raise_pole:
        raise PoleError(f"{what} vanishes in a denominator", factor=what)


def c_scaled(g, a, b, c, q, z):
    """c(gamma) as a mantissa/exponent pair; no pole or zero handling."""
    g = np.asarray(g, dtype=complex)
    acc, _ = _poch_scaled([a / g, b / g, c / g], [a * b, a * c], q)
    acc.mul_scaled(_theta_scaled(-q / (a * b * c * z * g), q))
    acc.mul_scaled(_theta_scaled(-b * c * z, q), power=-1)
    den, _ = _poch_scaled([1 / g**2], [], q)
    acc.mul_scaled(den, power=-1)
    return acc


def c_raw(g, a, b, c, q, z, raise_pole=True):
    """c(gamma) = (a/g, b/g, c/g)_inf theta(-q/(abczg)) / ((ab, ac)_inf theta(-bcz) (1/g^2)_inf).

    Numerator factors within 1e-10 (log-q units) of a zero are set to zero
    exactly, so that c(1/gamma) vanishes at the discrete spectrum instead of
    returning rounding noise.
    """
    g = np.asarray(g, dtype=complex)
    pole = _near_qpower(1 / g**2, q, True)
    _pole_guard(pole, "(1/gamma^2;q)_inf", raise_pole)
    val = c_scaled(np.where(pole, 0.5, g), a, b, c, q, z).value()
    zero = (_near_qpower(a / g, q, True) | _near_qpower(b / g, q, True) | _near_qpower(c / g, q, True)
            | _near_qpower(-q / (a * b * c * z * g), q, False))
    val = np.where(zero, 0.0, val)
    val = np.where(pole, np.inf, val)
    return val[()] if np.ndim(val) == 0 else val


def K_raw(g, a, b, c, q, z, raise_pole=True):
    """K(gamma) = (ab, ac, qg/b, qg/c)_inf theta(-bcz, -az/g) / ((qg^2, a/g)_inf theta(bc, -abz, -acz))."""
    g = np.asarray(g, dtype=complex)
    pole = _near_qpower(q * g**2, q, True) | _near_qpower(a / g, q, True)
    _pole_guard(pole, "(q gamma^2, a/gamma;q)_inf", raise_pole)
    gs = np.where(pole, 0.5 + 0.5j, g)
    acc, _ = _poch_scaled([a * b, a * c, q * gs / b, q * gs / c], [q * gs**2, a / gs], q)
    for u in (-b * c * z, -a * z / gs):
        acc.mul_scaled(_theta_scaled(u, q))
    for v in (b * c, -a * b * z, -a * c * z):
        acc.mul_scaled(_theta_scaled(v, q), power=-1)
    val = np.where(pole, np.inf, acc.value())
    return val[()] if np.ndim(val) == 0 else val


def _swap(p):
    return p.a, p.q / p.b, p.q / p.c, p.q, p.b * p.c * p.z / p.q


def c_function(gamma, p, route="scaled"):
    """The c-function c(gamma).

    ``route="direct"`` multiplies plain q-shifted factorials and uses
    ``theta_shift`` for the theta factor; it is a cross-check for moderate
    arguments.
    """
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    if route == "scaled":
        return c_raw(gamma, a, b, c, q, z)
    g = complex(gamma)
    if abs(1 - g**-2) < 1e-14 or _near_qpower(g**-2, q, True):
        raise PoleError("(1/gamma^2;q)_inf vanishes", factor="(1/gamma^2;q)_inf")
    u = -q / (a * b * c * z * g)
    k = math.floor(math.log(abs(u)) / math.log(q))
    th = theta_shift(u / q**k, q, k)
    num = qpoch_inf(a / g, q).value * qpoch_inf(b / g, q).value * qpoch_inf(c / g, q).value * th
    den = qpoch_inf(a * b, q).value * qpoch_inf(a * c, q).value * theta(-b * c * z, q).value * qpoch_inf(g**-2, q).value
    return num / den


def ctilde_function(gamma, p, route="swap"):
    """c~(gamma) = c(gamma; a, q/b, q/c; bcz/q), or the explicit display."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    if route == "swap":
        return c_raw(gamma, *_swap(p))
    g = np.asarray(gamma, dtype=complex)
    num = qpoch_inf_ratio([a / g, q / (b * g), q / (c * g)], [q * a / b, q * a / c, 1 / g**2], q)
    return num * theta_ratio([-1 / (a * z * g)], [-1 / z], q)


def K_coefficients(gamma, p):
    """(K(gamma), K~(gamma)) of the expansion Phi = K phi + K~ psi."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    return K_raw(gamma, a, b, c, q, z), K_raw(gamma, *_swap(p))


def wronskian_psi_phi_closed(gamma, p):
    """W(psi, phi) = (1-q)(a g, a/g)_inf theta(bc) / (ab, ac, qa/b, qa/c)_inf."""
    a, b, c, q = p.a, p.b, p.c, p.q
    g = np.asarray(gamma, dtype=complex)
    val = (1 - q) * qpoch_inf_ratio([a * g, a / g], [a * b, a * c, q * a / b, q * a / c], q) * theta(b * c, q).value
    return val[()] if np.ndim(val) == 0 else val


def wronskian_Phi_pair(gamma, p):
    """W(Phi_g, Phi_{1/g}) = a K (g - 1/g), K the lattice constant."""
    g = complex(gamma)
    if abs(g * g - 1) < 1e-12:
        raise PoleError("gamma = +-1 lies in the singular set", factor="gamma^2")
    return p.a * const_K(p) * (g - 1 / g)


def W_gamma(gamma, p):
    """W(gamma) = W(Phi_g, phi_g) = a K c(1/g) (g - 1/g)."""
    g = np.asarray(gamma, dtype=complex)
    val = p.a * const_K(p) * c_raw(1 / g, p.a, p.b, p.c, p.q, p.z) * (g - 1 / g)
    return val[()] if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class ConnectionData:
    c_plus: complex
    c_minus: complex
    ctilde_plus: complex
    ctilde_minus: complex
    K_coef: complex
    Ktilde_coef: complex
    W_gamma: complex


def connection_data(gamma, p):
    g = complex(gamma)
    K, Kt = K_coefficients(g, p)
    return ConnectionData(complex(c_function(g, p)), complex(c_function(1 / g, p)),
                          complex(ctilde_function(g, p)), complex(ctilde_function(1 / g, p)),
                          complex(K), complex(Kt), complex(W_gamma(g, p)))


def matrix_identity_residual(gamma, p):
    """Relative Frobenius residual of C * Kmat - I for the 2x2 connection matrices."""
    g = complex(gamma)
    C = np.array([[c_function(g, p), c_function(1 / g, p)],
                  [ctilde_function(g, p), ctilde_function(1 / g, p)]], dtype=complex)
    K1, Kt1 = K_coefficients(g, p)
    K2, Kt2 = K_coefficients(1 / g, p)
    Kmat = np.array([[K1, Kt1], [K2, Kt2]], dtype=complex)
    prod = C @ Kmat
    scale = np.linalg.norm(C) * np.linalg.norm(Kmat)
    return float(np.linalg.norm(prod - np.eye(2)) / max(1.0, scale))


def connection_expand(gamma, pt, p, which="phi"):
    """|f(x) - c(g)Phi_g(x) - c(1/g)Phi_{1/g}(x)| / (1 + |f(x)|) for f = phi or psi at a Pos point."""
    g = complex(gamma)
    if pt.branch != POS:
        raise PoleError("connection formulas hold on the Pos branch only")
    if abs(g * g - 1) < 1e-12 or _eigen.in_S_sing(g, p):
        raise PoleError("gamma lies in the singular set S_sing", factor="S_sing")
    if which == "phi":
        f = _eigen.phi(g, pt, p).value
        cp, cm = c_function(g, p), c_function(1 / g, p)
    else:
        f = _eigen.psi(g, pt, p).value
        cp, cm = ctilde_function(g, p), ctilde_function(1 / g, p)
    rhs = cp * _eigen.phi_asym(g, pt, p).value + cm * _eigen.phi_asym(1 / g, pt, p).value
    return float(abs(f - rhs) / (1 + abs(f)))
