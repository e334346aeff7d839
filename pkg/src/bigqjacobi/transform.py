"""Forward and inverse transform, dual orthogonality and the compact polynomial case.

The transform of a function f on the lattice is ``(F f)(gamma) = <f, phi_gamma>``
and its inverse integrates ``g(gamma) phi_gamma(x)`` against the Plancherel
measure of :mod:`bigqjacobi.spectral`.
"""

from dataclasses import dataclass
import math

import numpy as np

from .eigen import big_qjacobi_poly, big_qjacobi_prefactor, gamma_from_mu, phi_core, psi_core
from .lattice import LatticeFunction, Parameters, jackson_weight, weight_r
from .qseries import DomainError, phi_series, qpoch_finite, qpoch_inf_ratio, theta
from .spectral import SpectralMeasure, band, const_M, stone_lhs

__all__ = [
    "forward", "forward_measure", "SpectralFunction", "inverse", "plancherel_check", "phi_on_measure",
    "HahnSystem", "hahn_poly", "hahn_complement", "hahn_gram", "hahn_norm_closed", "hahn_norm_lattice",
    "PolyLattice", "big_qjacobi_norm", "poly_gram", "poly_wronskian_closed", "poly_wronskian_lattice",
    "poly_stone_band",
]


# --- eigenfunctions on the measure -----------------------------------------------------------

def phi_on_measure(x, measure):
    """Eigenfunctions at lattice values x on a measure.

    Returns phi_gamma(x) on the theta grid, shape (N, X), and
    sqrt(mass) phi_gamma(x) at the atoms, shape (A, X).
    """
    p = measure.p
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = measure.gammas
    cont = phi_core(g[:, None], x[None, :], p.a, p.b, p.c, p.q)[0]
    disc = measure.atom_eigenfunctions(x).reshape(len(measure.atoms), len(x))
    return cont, disc


def _support(f, p):
    idx = np.nonzero(f.samples)[0]
    x = f.window.x(p)[idx]
    return x, f.samples[idx] * jackson_weight(x, p)


def forward(f, gamma, p):
    """(F f)(gamma) = sum over the support of f of f(x) conj(phi_gamma(x)) (1-q)|x| / p(x).

    ``gamma`` may be an array.  f must be finitely supported in its window;
    points where f vanishes are skipped.
    """
    g = np.asarray(gamma, dtype=complex)
    x, fw = _support(f, p)
    if x.size == 0:
        return np.zeros(g.shape, dtype=complex)[()]
    ph = phi_core(g.reshape(-1, 1), x[None, :], p.a, p.b, p.c, p.q)[0]
    out = (np.conj(ph) @ fw).reshape(g.shape)
    return out[()] if out.ndim == 0 else out


@dataclass
class SpectralFunction:
    """A W-invariant function g sampled on a measure.

    ``continuous_samples`` holds g on the theta grid.  ``atom_values`` holds
    g(atom) sqrt(mass) rather than g(atom): for atoms close to 0 the mass
    underflows while g(atom) overflows, and the product is what integrals need.
    """

    measure: SpectralMeasure
    continuous_samples: np.ndarray
    atom_values: np.ndarray

    def __post_init__(self):
        self.continuous_samples = np.asarray(self.continuous_samples, dtype=complex)
        self.atom_values = np.asarray(self.atom_values, dtype=complex)
        if self.continuous_samples.shape != (self.measure.size,):
            raise DomainError("continuous samples must match the measure grid")
        if self.atom_values.shape != (len(self.measure.atoms),):
            raise DomainError("one value per atom is required")

    def integral(self, other=None):
        """Integral of self * conj(other) (or of self) over the measure."""
        m = self.measure
        a, b = self.continuous_samples, self.atom_values
        if other is not None:
            a, b = a * np.conj(other.continuous_samples), b * np.conj(other.atom_values)
        return complex(np.sum(m.weights * a) + np.sum(b))


def forward_measure(f, measure):
    """F f sampled on a measure, as a :class:`SpectralFunction`."""
    x, fw = _support(f, measure.p)
    if x.size == 0:
        return SpectralFunction(measure, np.zeros(measure.size), np.zeros(len(measure.atoms)))
    cont, disc = phi_on_measure(x, measure)
    return SpectralFunction(measure, np.conj(cont) @ fw, np.conj(disc) @ fw)


def inverse(g, x, p=None):
    """(G g)(x) = int g(gamma) phi_gamma(x) d nu(gamma) at lattice values x.

    ``x`` may be an array of lattice values or a :class:`~bigqjacobi.lattice.LatticeWindow`,
    in which case a :class:`~bigqjacobi.lattice.LatticeFunction` is returned.
    """
    m = g.measure
    p = m.p if p is None else p
    window = None
    if hasattr(x, "x"):
        window, x = x, x.x(p)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    cont, disc = phi_on_measure(xs, m)
    vals = (m.weights * g.continuous_samples) @ cont
    if len(m.atoms):
        vals = vals + g.atom_values @ disc
    if window is not None:
        return LatticeFunction(window, vals)
    return vals if np.ndim(x) else complex(vals[0])


def plancherel_check(f, g, p, measure=None):
    """Return (<f, g>, int F f conj(F g) d nu)."""
    measure = SpectralMeasure(p) if measure is None else measure
    w = jackson_weight(f.window.x(p), p)
    lhs = complex(np.sum(f.samples * np.conj(g.samples) * w))
    rhs = forward_measure(f, measure).integral(forward_measure(g, measure))
    return lhs, rhs


# --- continuous dual q^-1-Hahn system ----------------------------------------------------------

@dataclass(frozen=True)
class HahnSystem:
    """Parameters t0, t1, t2 > 0 with t_i t_j > 1, and z > 0."""

    t0: float
    t1: float
    t2: float
    z: float = 1.0

    def __post_init__(self):
        t = (self.t0, self.t1, self.t2)
        if min(t) <= 0 or self.z <= 0:
            raise DomainError("t0, t1, t2 and z must be positive")
        for i in range(3):
            for j in range(i + 1, 3):
                if t[i] * t[j] <= 1:
                    raise DomainError(f"t{i} t{j} > 1 is violated")

    def parameters(self, q):
        return Parameters(q, 1 / self.t0, 1 / self.t1, 1 / self.t2, self.z)


def hahn_poly(k, gamma, sys, q, route="phi"):
    """p_k(gamma) = phi_gamma(-q^k) at parameters (1/t0, 1/t1, 1/t2).

    ``route="hahn"`` sums the terminating 3phi2(q^k, t0 g, t0/g; t0 t1, t0 t2; 1/q, 1/q).
    """
    k = int(k)
    if k < 0:
        raise DomainError("k must be non-negative")
    g = np.asarray(gamma, dtype=complex)
    if route == "phi":
        p = sys.parameters(q)
        out = phi_core(g, -(q**k), p.a, p.b, p.c, q)[0]
        return out[()] if np.ndim(out) == 0 else out
    if route != "hahn":
        raise ValueError(f"unknown route {route!r}")
    Q = 1 / q
    t0, t1, t2 = sys.t0, sys.t1, sys.t2
    out = np.zeros(g.shape, dtype=complex)
    term = np.ones(g.shape, dtype=complex)
    for j in range(k + 1):
        out = out + term
        term = term * (1 - q**k * Q**j) * (1 - t0 * g * Q**j) * (1 - t0 / g * Q**j) * Q / (
            (1 - t0 * t1 * Q**j) * (1 - t0 * t2 * Q**j) * (1 - Q ** (j + 1)))
    return out[()] if out.ndim == 0 else out


def hahn_complement(k, gamma, sys, q, route="phi"):
    """r_k^z(gamma) = phi_gamma(z q^k) at parameters (1/t0, 1/t1, 1/t2).

    ``route="series"`` uses the 3phi2 in base q with argument gamma/t0,
    valid for |gamma/t0| < 1.
    """
    k = int(k)
    if route == "phi":
        p = sys.parameters(q)
        g = np.asarray(gamma, dtype=complex)
        out = phi_core(g, sys.z * q**k, p.a, p.b, p.c, q)[0]
        return out[()] if np.ndim(out) == 0 else out
    if route != "series":
        raise ValueError(f"unknown route {route!r}")
    g = complex(gamma)
    t0, t1, t2, z = sys.t0, sys.t1, sys.t2, sys.z
    if abs(g / t0) >= 1:
        raise DomainError("the series route needs |gamma/t0| < 1")
    u = -(q**k) * z
    pre = qpoch_inf_ratio([g / t0, 1 / (t1 * t2), u / (t0 * t1 * t2 * g)],
                          [1 / (t0 * t1), 1 / (t0 * t2), u / (t1 * t2)], q)
    s = phi_series([1 / (t1 * g), 1 / (t2 * g), u / (t1 * t2)], [1 / (t1 * t2), u / (t0 * t1 * t2 * g)], q, g / t0)
    return complex(pre * s.value)


def hahn_norm_closed(kind, k, sys, q):
    """Closed-form squared norm of p_k (``kind="p"``) or r_k^z (``kind="r"``) under d sigma_z."""
    t0, t1, t2, z = sys.t0, sys.t1, sys.t2, sys.z
    th = theta((-z / (t0 * t1), -z / (t0 * t2), -z / (t1 * t2)), q).value.real
    if kind == "p":
        head = theta(-z, q).value.real / th / qpoch_inf_ratio([q, 1 / (t0 * t1), 1 / (t0 * t2), 1 / (t1 * t2)], [], q).real
        fin = (qpoch_finite(q, q, k) * qpoch_finite(1 / (t1 * t2), q, k)
               / (qpoch_finite(1 / (t0 * t1), q, k) * qpoch_finite(1 / (t0 * t2), q, k))).real
        return float(head * fin * q ** (-k))
    if kind == "r":
        head = theta(-1 / z, q).value.real / th / qpoch_inf_ratio([1 / (t0 * t1), 1 / (t0 * t2)], [], q).real ** 2
        u = -(q**k) * z
        tail = qpoch_inf_ratio([u / (t0 * t1), u / (t0 * t2)], [u / (t1 * t2), q * u], q).real
        return float(head * tail * q ** (-k))
    raise ValueError(f"unknown kind {kind!r}")


def hahn_norm_lattice(kind, k, sys, q):
    """The same squared norm from the lattice weight: p(x) / ((1-q)|x| M)."""
    p = sys.parameters(q)
    x = -(q**k) if kind == "p" else sys.z * q**k
    return float(1 / (jackson_weight(x, p) * const_M(p)))


def hahn_gram(sys, q, n_poly=7, comp_range=(-6, 6), measure=None):
    """Gram matrix of p_0..p_{n_poly-1} and r_k^z for k in comp_range (inclusive) under d sigma_z.

    Returns (G, labels).
    """
    p = sys.parameters(q)
    measure = SpectralMeasure(p) if measure is None else measure
    ks = list(range(comp_range[0], comp_range[1] + 1))
    x = np.concatenate([-(q ** np.arange(n_poly, dtype=float)), sys.z * q ** np.array(ks, dtype=float)])
    labels = [f"p{k}" for k in range(n_poly)] + [f"r{k}" for k in ks]
    cont, disc = phi_on_measure(x, measure)
    G = (cont.T * measure.weights) @ np.conj(cont)
    if len(measure.atoms):
        G = G + disc.T @ np.conj(disc)
    return G / measure.M, labels


# --- compact big q-Jacobi case -------------------------------------------------------------

@dataclass
class PolyLattice:
    """The lattice [-1, -q/bc]_q for bc < 0, truncated at depth ``k_max`` on each side.

    Points are stored in increasing order: -1, -q, ..., -q^k_max, then
    -q^(k_max+1)/bc, ..., -q/bc.
    """

    p: Parameters
    k_max: int = 80

    def __post_init__(self):
        self.p.check_polynomial()

    @property
    def x(self):
        q, b, c = self.p.q, self.p.b, self.p.c
        k = np.arange(self.k_max + 1, dtype=float)
        return np.concatenate([-(q**k), (-(q ** (k + 1)) / (b * c))[::-1]])

    @property
    def weights(self):
        return jackson_weight(self.x, self.p)

    def inner(self, f, g):
        return complex(np.sum(f * np.conj(g) * self.weights))


def big_qjacobi_norm(n, p):
    """N(n) = ||psi_{a q^n}||^2 on [-1, -q/bc]_q, in closed form."""
    p.check_polynomial()
    a, b, c, q = p.a, p.b, p.c, p.q
    n = int(n)
    head = (1 - q) * qpoch_inf_ratio([q, b * c, q / (b * c), q ** (2 * n + 1) * a * a],
                                      [q * a / b, q * a / c, q**n * a * b, q**n * a * c], q).real
    fin = (qpoch_finite(q, q, n) * qpoch_finite(q**n * a * a, q, n)
           / (qpoch_finite(q * a / b, q, n) * qpoch_finite(q * a / c, q, n)))
    return float((head * fin).real * (-(q ** ((3 - n) / 2)) / (b * c)) ** n)


def _psi_poly(n, x, p):
    # the Jacobi-form sum carries a prefactor of size (|c|/a)^n q^(-n(n+1)/2)
    # and cancels; the direct sum does not
    return big_qjacobi_poly(n, x, p, route="phi") / big_qjacobi_prefactor(n, p)


def poly_gram(n_max, p, k_max=80):
    """Matrix of <psi_m, psi_n> on the compact lattice for m, n <= n_max."""
    lat = PolyLattice(p, k_max)
    vals = np.array([_psi_poly(n, lat.x, p) for n in range(n_max + 1)])
    return (vals * lat.weights) @ np.conj(vals).T


def poly_wronskian_closed(gamma, p):
    """(1-q)(a g, a/g)_inf theta(bc) / (ab, ac, qa/b, qa/c)_inf."""
    a, b, c, q = p.a, p.b, p.c, p.q
    g = np.asarray(gamma, dtype=complex)
    r = qpoch_inf_ratio([a * g, a / g], [a * b, a * c, q * a / b, q * a / c], q)
    return (1 - q) * r * theta(b * c, q).value.real


def poly_wronskian_lattice(gamma, x, p):
    """W(psi_g, phi_g)(x) from the lattice definition at points x of the compact lattice."""
    a, b, c, q = p.a, p.b, p.c, p.q
    g = complex(gamma)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ph = phi_core(g, np.concatenate([x, q * x]), a, b, c, q)[0]
    ps = psi_core(g, np.concatenate([x, q * x]), a, b, c, q)[0]
    n = len(x)
    r = weight_r(x, p).value
    return q * r / ((1 - q) * x) * (ps[:n] * ph[n:] - ps[n:] * ph[:n])


def _poly_kernel(p):
    def kernel(mus, xs):
        g = np.atleast_1d(gamma_from_mu(mus, p))
        left = phi_core(g[:, None], xs[None, :], p.a, p.b, p.c, p.q)[0]
        right = psi_core(g[:, None], xs[None, :], p.a, p.b, p.c, p.q)[0]
        return left, right, np.atleast_1d(poly_wronskian_closed(g, p))
    return kernel


def poly_stone_band(f_idx, g_idx, p, eps_list=(1e-2, 5e-3, 2.5e-3), k_max=30, seed=0):
    """Stone's formula over the band [-(1+a)^2, -(1-a)^2] in the compact case.

    f and g are random complex functions supported on the lattice indices
    ``f_idx`` and ``g_idx`` of :class:`PolyLattice`.  Returns (lhs, scale);
    the band carries no spectral mass, so lhs should vanish.
    """
    lat = PolyLattice(p, k_max)
    rng = np.random.default_rng(seed)
    x = lat.x
    f = np.zeros(len(x), complex)
    g = np.zeros(len(x), complex)
    f[list(f_idx)] = rng.normal(size=len(f_idx)) + 1j * rng.normal(size=len(f_idx))
    g[list(g_idx)] = rng.normal(size=len(g_idx)) + 1j * rng.normal(size=len(g_idx))
    sup = np.nonzero((f != 0) | (g != 0))[0]
    w = lat.weights[sup]
    lo, hi = band(p)
    lhs, _ = stone_lhs(x[sup], f[sup] * w, g[sup] * w, _poly_kernel(p), lo, hi, eps_list)
    scale = math.sqrt(lat.inner(f, f).real * lat.inner(g, g).real)
    return complex(lhs), scale
