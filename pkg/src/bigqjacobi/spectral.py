"""Plancherel measure, Green kernel and Stone's formula for L.

The measure has a continuous part on the unit circle, stored as a density
in theta on [0, pi] (the circle folded by gamma <-> 1/gamma), and atoms at
the zeros of gamma -> c(1/gamma) in the punctured unit disc.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .cfun import c_raw, W_gamma
from .eigen import gamma_from_mu, mu, phi_asym_pos_values, phi_atom_scaled, phi_atom_table, phi_core, psi_core
from .lattice import const_K, jackson_weight
from .qseries import DomainError, _poch_scaled, _theta_scaled, qpoch_finite, qpoch_inf_ratio, theta

__all__ = [
    "const_M", "DiscreteAtom", "discrete_set_S", "aw_weight", "aw_residue", "discrete_mass",
    "mass_closed_form", "mass_log", "mass_residue", "relplanch_residual", "continuous_density", "SpectralMeasure",
    "spectral_measure", "green_kernel", "green_apply", "resolvent_form", "stone_projection_check",
    "band",
]

RESIDUE_NODES = 64


def band(p):
    """The continuous spectrum [-(1+a)^2, -(1-a)^2]."""
    return -(1 + p.a) ** 2, -(1 - p.a) ** 2


def const_M(p, route="K"):
    """M = (ab, ac)^2 theta(-bcz)^2 / K, or the explicit quotient with theta(-1/z)."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    poch2 = qpoch_inf_ratio([a * b, a * c], [], q).real ** 2
    if route == "K":
        return float(poch2 * theta(-b * c * z, q).value.real ** 2 / const_K(p))
    if route == "explicit":
        th = theta((-a * b * z, -a * c * z, -b * c * z), q).value.real
        return float(poch2 * th / ((1 - q) * z * theta(-1 / z, q).value.real))
    raise ValueError(f"unknown route {route!r}")


@dataclass(frozen=True)
class DiscreteAtom:
    """One point of the discrete spectrum.

    ``family`` is ``"pos"`` for gamma = 1/(q^k e), e one of a, b, c (named by
    ``e``), and ``"neg"`` for gamma = -abcz/q^(k+1).
    """

    gamma: float
    family: str
    k: int
    e: str = ""
    mass: float = float("nan")
    log_mass: float = float("nan")

    def eigenvalue(self, p):
        return float(mu(self.gamma, p).real)

    def as_dict(self):
        return {"family": self.family, "e": self.e, "k": self.k, "gamma": self.gamma, "mass": self.mass,
                "log_mass": self.log_mass}


def _pos_family(p):
    out = []
    for name in ("a", "b", "c"):
        e = getattr(p, name)
        k = 0
        while e * p.q**k > 1:
            out.append(DiscreteAtom(1 / (p.q**k * e), "pos", k, name))
            k += 1
    return out


def _neg_kmax(p):
    """Largest k with abcz/q^(k+1) < 1."""
    s = p.a * p.b * p.c * p.z
    k = math.ceil(math.log(s) / math.log(p.q)) - 1
    while s / p.q ** (k + 1) >= 1:
        k -= 1
    while s / p.q ** (k + 2) < 1:
        k += 1
    return k


def _with_mass(atom, p):
    lm = mass_log(atom, p)
    return DiscreteAtom(atom.gamma, atom.family, atom.k, atom.e, math.exp(lm) if lm > -745 else 0.0, lm)


def _depth_share(atom, p, depth):
    """Largest share mass |phi(x)|^2 (1-q)|x| / p(x) of the atom at x = -q^depth, z q^depth."""
    x = np.array([-(p.q**depth), p.z * p.q**depth])
    acc = phi_atom_scaled(atom.gamma, x, p)
    lphi = np.log(np.abs(acc.m)) + acc.e * math.log(2)
    lw = np.log(jackson_weight(x, p))
    return float(np.max(np.exp(np.minimum(atom.log_mass + 2 * lphi + lw, 0.0))))


def discrete_set_S(p, mass_floor=1e-300, with_masses=True, depth=None):
    """Atoms of the Plancherel measure, largest |gamma| first.

    The Neg family is infinite towards gamma = 0.  Without ``depth`` it is
    cut where the mass drops below ``mass_floor``.  Atoms with tiny mass
    still matter at lattice points close to the origin, because phi grows
    there like gamma^-k; with ``depth`` the list continues until the share
    of three consecutive atoms in the spike identity at x = -q^depth and
    z q^depth drops below 1e-20.
    """
    p.check_V()
    atoms = _pos_family(p)
    k = _neg_kmax(p)
    s = p.a * p.b * p.c * p.z
    small = 0
    while True:
        atom = _with_mass(DiscreteAtom(-s / p.q ** (k + 1), "neg", k), p)
        if not atom.log_mass > math.log(mass_floor):
            if depth is None:
                break
            small = small + 1 if _depth_share(atom, p, depth) < 1e-20 else 0
            if small == 3:
                break
        atoms.append(atom)
        k -= 1
    atoms = [t if t.family == "neg" else _with_mass(t, p) for t in atoms]
    if not with_masses:
        atoms = [DiscreteAtom(t.gamma, t.family, t.k, t.e) for t in atoms]
    return sorted(atoms, key=lambda t: -abs(t.gamma))


def aw_weight(x, t, q):
    """Askey-Wilson weight (x^2, 1/x^2)_inf / prod_j (t_j x, t_j/x)_inf."""
    x = np.asarray(x, dtype=complex)
    den = [tj * x for tj in t] + [tj / x for tj in t]
    val = qpoch_inf_ratio([x * x, 1 / (x * x)], den, q)
    return val


def aw_residue(e_index, k, t, q):
    """Residue of Delta(x)/x at x = e q^k, e = t[e_index], from the closed form."""
    t = list(t)
    e = t[e_index]
    f, g, h = [t[i] for i in range(4) if i != e_index]
    k = int(k)
    if k < 0:
        raise DomainError("the residue formula needs k >= 0")
    head = qpoch_inf_ratio([1 / e**2], [q, e * f, f / e, e * g, g / e, e * h, h / e], q)
    fin = (qpoch_finite(e * e, q, k) * qpoch_finite(e * f, q, k) * qpoch_finite(e * g, q, k) * qpoch_finite(e * h, q, k)
           / (qpoch_finite(q, q, k) * qpoch_finite(q * e / f, q, k) * qpoch_finite(q * e / g, q, k) * qpoch_finite(q * e / h, q, k)))
    return complex(head * fin * (1 - e * e * q ** (2 * k)) / (1 - e * e) * (q / (e * f * g * h)) ** k).real


def _qpoch_any(x, q, k):
    """(x;q)_k for any integer k, as a _Scaled value: (x;q)_inf / (x q^k;q)_inf."""
    acc, _ = _poch_scaled([x], [x * q**k], q)
    return acc


def mass_closed_form(atom, p):
    """Mass of an atom from the closed-form expressions (positive; may underflow to 0)."""
    return float(_mass_scaled(atom, p).value().real)


def mass_log(atom, p):
    """Natural logarithm of the closed-form mass; finite where the mass underflows."""
    acc = _mass_scaled(atom, p)
    v = complex(acc.m)
    if not v.real > 0:
        return -math.inf if v.real == 0 else math.nan
    return math.log(v.real) + int(acc.e) * math.log(2)


def _mass_scaled(atom, p):
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    M = const_M(p)
    k = atom.k
    if atom.family == "pos":
        vals = {"a": a, "b": b, "c": c}
        e = vals[atom.e]
        f, g = [vals[n] for n in ("a", "b", "c") if n != atom.e]
        acc, _ = _poch_scaled([e**-2], [q, e * f, f / e, e * g, g / e], q)
        acc.mul_scaled(_theta_scaled(-f * g * z, q), power=-1)
        acc.mul_scaled(_theta_scaled(-e * e * f * g * z, q), power=-1)
        fin = (qpoch_finite(e * e, q, k) * qpoch_finite(e * f, q, k) * qpoch_finite(e * g, q, k)
               / (qpoch_finite(q, q, k) * qpoch_finite(q * e / f, q, k) * qpoch_finite(q * e / g, q, k)))
        acc.mul(M * fin * (1 - e * e * q ** (2 * k)) / (1 - e * e) * (-q ** ((k + 1) / 2) / (f * g)) ** k)
        return acc
    s = a * b * c * z
    acc, _ = _poch_scaled([], [q, q, -q / (a * b * z), -q / (a * c * z), -q / (b * c * z),
                               -a * s / q, -b * s / q, -c * s / q], q)
    for u in (-q / (a * b * z), -q / (a * c * z), -q / (b * c * z)):
        acc.mul_scaled(_qpoch_any(u, q, k))
    for v in (-q * q / (a * s), -q * q / (b * s), -q * q / (c * s)):
        acc.mul_scaled(_qpoch_any(v, q, k), power=-1)
    acc.mul(q ** (2 * k) - s * s / q**2)
    # (q^((k+3)/2) / (a b c s))^k through its logarithm
    acc.mul_exp(k * ((k + 3) / 2 * math.log(q) - math.log(a * b * c * s)))
    return acc.mul(M)


def _pole_candidates(p, span=60):
    """Poles of 1/(c(g) c(1/g)): zeros of c(g) and of c(1/g)."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    s = a * b * c * z
    js = np.arange(-span, span + 1)
    pts = []
    for e in (a, b, c):
        pts.append(e * q ** js[js >= 0])
        pts.append(1 / (e * q ** js[js >= 0]))
    pts.append(-s * q ** (js - 1.0))
    pts.append(-q ** (1.0 - js) / s)
    pts = np.concatenate(pts)
    return pts[np.isfinite(pts) & (pts != 0)]


def mass_residue(atom, p, nodes=RESIDUE_NODES):
    """(1/K) Res of -1/(g c(g) c(1/g)) at the atom, by the trapezoid rule on a small circle."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    g0 = atom.gamma
    others = _pole_candidates(p)
    d = np.abs(others - g0)
    d = d[d > 1e-12 * max(abs(g0), 1e-300)]
    r = min(1e-3, 0.5 * float(d.min()), 0.5 * abs(g0))
    t = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    ring = g0 + r * t
    with np.errstate(all="ignore"):
        vals = -1 / (ring * c_raw(ring, a, b, c, q, z) * c_raw(1 / ring, a, b, c, q, z))
    res = np.mean(vals * r * t)
    return float(res.real / const_K(p)), float(abs(res.imag) / const_K(p))


def discrete_mass(atom, p, route="closed"):
    """Mass of an atom; ``route`` is ``"closed"`` or ``"residue"``."""
    if route == "closed":
        return mass_closed_form(atom, p)
    if route == "residue":
        return mass_residue(atom, p)[0]
    raise ValueError(f"unknown route {route!r}")


def relplanch_residual(gamma, p):
    """Max relative gap between 1/(K c(g) c(1/g) g) and the Askey-Wilson form, over g in {a, b, c}."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    g = complex(gamma)
    K = const_K(p)
    M = const_M(p)
    lhs = 1 / (K * complex(c_raw(g, a, b, c, q, z)) * complex(c_raw(1 / g, a, b, c, q, z)) * g)
    worst = 0.0
    names = {"a": a, "b": b, "c": c}
    for gname in ("a", "b", "c"):
        e, f = [names[n] for n in ("a", "b", "c") if n != gname]
        gg = names[gname]
        t = (e, f, -q / (e * f * gg * z), -e * f * gg * z)
        rhs = M * complex(aw_weight(g, t, q)) / (complex(qpoch_inf_ratio([gg * g, gg / g], [], q)) * g)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return worst


def _inv_cc(gamma, p):
    """1/(c(g) c(1/g)); zero where c has its pole at g = +-1."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    g = np.asarray(gamma, dtype=complex)
    with np.errstate(all="ignore"):
        v = 1 / (c_raw(g, a, b, c, q, z, raise_pole=False) * c_raw(1 / g, a, b, c, q, z, raise_pole=False))
    return v


def continuous_density(theta_, p):
    """Density 1/(2 pi K |c(e^{i theta})|^2) of the continuous part with respect to theta on [0, pi].

    Where c vanishes on the circle the quotient has a removable singularity;
    those points are replaced by the mean of the values at theta +- 1e-6.
    """
    th = np.asarray(theta_, dtype=float)
    K = const_K(p)
    v = _inv_cc(np.exp(1j * th), p).real
    bad = ~np.isfinite(v)
    if np.any(bad):
        lo = _inv_cc(np.exp(1j * (th[bad] - 1e-6)), p).real
        hi = _inv_cc(np.exp(1j * (th[bad] + 1e-6)), p).real
        v = np.array(v, dtype=float)
        v[bad] = 0.5 * (lo + hi)
    out = v / (2 * math.pi * K)
    return out[()] if out.ndim == 0 else out


@dataclass
class SpectralMeasure:
    """Plancherel measure: a theta rule on [0, pi] plus atoms.

    The default rule is the midpoint rule on [0, pi], which is the trapezoid
    rule on the full circle for an even periodic integrand, so it converges
    spectrally; the grid also avoids the zeros of the density at theta = 0
    and pi.  An atom at distance d < ``GRADE_BELOW`` from the circle puts a
    pole of the density at distance d from theta = 0 or pi, and the
    spectral rate collapses; Gauss-Legendre panels graded towards that end
    are used instead.  ``depth`` is the deepest lattice index (towards the
    origin) the atom list must resolve; see :func:`discrete_set_S`.
    """

    GRADE_BELOW = 0.05

    p: object
    n_theta: int = 1024
    depth: int = 40
    atoms: list = field(default=None)
    K: float = field(default=None)
    M: float = field(default=None)
    _table: tuple = field(default=None, init=False, repr=False)
    _rule: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.p.check_V()
        if self.atoms is None:
            self.atoms = discrete_set_S(self.p, depth=self.depth)
        if self.K is None:
            self.K = const_K(self.p)
        if self.M is None:
            self.M = const_M(self.p)

    def _theta_rule(self):
        if self._rule is None:
            near = {0: [], 1: []}
            for t in self.atoms:
                d = abs(1 - abs(t.gamma))
                if d < self.GRADE_BELOW:
                    near[0 if t.gamma > 0 else 1].append(d)
            n = self.n_theta
            if not near[0] and not near[1]:
                th = (np.arange(n) + 0.5) * math.pi / n
                w = np.full(n, math.pi / n)
            else:
                edges = list(np.linspace(0, math.pi, max(2, n // 24) + 1))
                h = edges[1]
                for end, ds in near.items():
                    if not ds:
                        continue
                    step = h / 2
                    while step > min(ds) / 4:
                        edges.append(step if end == 0 else math.pi - step)
                        step /= 2
                    edges.append(step if end == 0 else math.pi - step)
                th, w = _gl_panels(np.array(sorted(set(edges))), 24)
            self._rule = (th, w * continuous_density(th, self.p))
        return self._rule

    @property
    def size(self):
        """Number of theta nodes."""
        return len(self._theta_rule()[0])

    @property
    def theta(self):
        return self._theta_rule()[0]

    @property
    def gammas(self):
        return np.exp(1j * self.theta)

    @property
    def weights(self):
        """Quadrature weights times the density."""
        return self._theta_rule()[1]

    @property
    def atom_gammas(self):
        return np.array([t.gamma for t in self.atoms])

    @property
    def atom_masses(self):
        return np.array([t.mass for t in self.atoms])

    @property
    def atom_log_masses(self):
        return np.array([t.log_mass for t in self.atoms])

    def atom_eigenfunctions(self, x):
        """sqrt(mass) phi_atom(x) for every atom, shape (atoms, len(x)).

        Both factors may leave the double range near the origin; the
        product is bounded by sqrt(p(x) / ((1-q)|x|)).  Values on the
        indices -60..depth are tabulated once per measure.
        """
        from .eigen import _lattice_indices
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ks = _lattice_indices(x, self.p)
        neg = x < 0
        lo = min(-60, int(ks[~neg].min()) if np.any(~neg) else 0)
        hi = max(self.depth, int(ks.max()))
        if self._table is None or self._table[0] > lo or self._table[1] < hi:
            rows = [phi_atom_table(t.gamma, self.p, hi, lo, hi) for t in self.atoms]
            half = 0.5 * self.atom_log_masses
            tn = np.array([r[0] for r in rows]).reshape(len(rows), hi + 1) + half[:, None]
            tp = np.array([r[1] for r in rows]).reshape(len(rows), hi - lo + 1) + half[:, None]
            self._table = (lo, hi, tn, tp)
        lo, _, tn, tp = self._table
        out = np.empty((len(self.atoms), len(x)), dtype=complex)
        out[:, neg] = np.exp(tn[:, ks[neg]])
        out[:, ~neg] = np.exp(tp[:, ks[~neg] - lo])
        return out

    def refined(self):
        return SpectralMeasure(self.p, 2 * self.n_theta, self.depth, self.atoms, self.K, self.M)

    def integrate(self, fn_theta, fn_atoms=None):
        """Integral of a function over the measure; ``fn_theta`` maps theta values to samples."""
        total = np.sum(self.weights * fn_theta(self.theta))
        if fn_atoms is not None and self.atoms:
            total = total + np.sum(self.atom_masses * fn_atoms(self.atom_gammas))
        return total

    def to_json(self, n_samples=16):
        th = (np.arange(n_samples) + 0.5) * math.pi / n_samples
        dens = continuous_density(th, self.p)
        data = {
            "K": self.K,
            "M": self.M,
            "atoms": [t.as_dict() for t in self.atoms],
            "density_samples": [{"theta": float(a), "value": float(b)} for a, b in zip(th, dens)],
        }
        return json.dumps(data, indent=2, sort_keys=True)


def spectral_measure(p, n_theta=1024, depth=40):
    return SpectralMeasure(p, n_theta, depth)


# --- Green kernel and resolvent ------------------------------------------------------------

def _check_resolvent_gamma(gamma):
    g = complex(gamma)
    if abs(g) >= 1:
        raise DomainError("the Green kernel needs |gamma| < 1")
    if abs(g.imag) < 1e-14:
        raise DomainError("mu(gamma) is real; the resolvent needs a non-real spectral parameter")
    return g


def _phi_Phi_points(gammas, x, p):
    """phi and Phi at arbitrary lattice points (x array) for an array of gammas; shapes (G, X)."""
    from .cfun import K_raw
    from .qseries import is_q_power
    g = np.atleast_1d(np.asarray(gammas, dtype=complex))
    x = np.asarray(x, dtype=float)
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    f = phi_core(g[:, None], x[None, :], a, b, c, q)[0]
    F = np.empty_like(f)
    neg = x < 0
    if np.any(neg):
        h = psi_core(g[:, None], x[None, neg], a, b, c, q)[0]
        K = K_raw(g, a, b, c, q, z)
        Kt = K_raw(g, a, q / b, q / c, q, b * c * z / q)
        F[:, neg] = K[:, None] * f[:, neg] + Kt[:, None] * h
    if np.any(~neg):
        ks = [is_q_power(xi / z, q) for xi in x[~neg]]
        if any(k is None for k in ks):
            raise DomainError("Pos-branch points must lie on the lattice z q^k")
        F[:, ~neg] = phi_asym_pos_values(g, ks, p)[0]
    return f, F


def green_kernel(gamma, window, p):
    """K_gamma(x, y) on window x window: Phi(max(x, y)) phi(min(x, y)) / W(gamma)."""
    g = _check_resolvent_gamma(gamma)
    x = window.x(p)
    f, F = _phi_Phi_points(g, x, p)
    f, F = f[0], F[0]
    W = complex(W_gamma(g, p))
    i = np.arange(len(x))
    hi = np.maximum(i[:, None], i[None, :])
    lo = np.minimum(i[:, None], i[None, :])
    return F[hi] * f[lo] / W


def green_apply(f, gamma, p):
    """G_f(., gamma) = (L - mu(gamma))^{-1} f for f supported inside its window.

    Evaluated as W^{-1}(Phi(x) sum_{y <= x} f phi w + phi(x) sum_{y > x} f Phi w),
    with w the Jackson weight; the two running sums are cumulative sums.
    ``f`` may also be a list of functions on one window, which shares the
    eigenfunction evaluations; a list is then returned.
    """
    from .lattice import LatticeFunction
    g = _check_resolvent_gamma(gamma)
    fs = list(f) if isinstance(f, (list, tuple)) else [f]
    win = fs[0].window
    if any(h.window != win for h in fs):
        raise DomainError("all functions must share one window")
    x = win.x(p)
    ph, Ph = _phi_Phi_points(g, x, p)
    ph, Ph = ph[0], Ph[0]
    w = jackson_weight(x, p)
    W = complex(W_gamma(g, p))
    out = []
    for h in fs:
        fw = h.samples * w
        left = np.cumsum(fw * ph)
        right = np.cumsum((fw * Ph)[::-1])[::-1]
        right = np.concatenate([right[1:], [0.0]])
        out.append(LatticeFunction(win, (Ph * left + ph * right) / W))
    return out if isinstance(f, (list, tuple)) else out[0]


def _resolvent_pair(mus, xs, fw, gw, kernel):
    # (<R(mu) f, g>, <R(mu) g, f>) from one kernel evaluation; the kernel is symmetric in x, y
    mus = np.asarray(mus, dtype=complex)
    xs = np.asarray(xs, dtype=float)
    fw = np.asarray(fw, dtype=complex)
    gw = np.asarray(gw, dtype=complex)
    flat = mus.ravel()
    fg = np.empty(flat.shape, dtype=complex)
    gf = np.empty(flat.shape, dtype=complex)
    n = len(xs)
    i = np.arange(n)
    hi = np.maximum(i[:, None], i[None, :])
    lo = np.minimum(i[:, None], i[None, :])
    chunk = 512
    for s0 in range(0, flat.size, chunk):
        m = flat[s0:s0 + chunk]
        left, right, W = kernel(m, xs)
        Kxy = right[:, hi] * left[:, lo] / W[:, None, None]
        fg[s0:s0 + chunk] = np.einsum("gij,j,i->g", Kxy, fw, np.conj(gw))
        gf[s0:s0 + chunk] = np.einsum("gij,j,i->g", Kxy, gw, np.conj(fw))
    return fg.reshape(mus.shape), gf.reshape(mus.shape)


def resolvent_form(mus, xs, fw, gw, kernel):
    """<(L - mu)^{-1} f, g> for finitely supported f, g and an array of non-real mu.

    ``xs`` are the support points in increasing order, ``fw`` and ``gw`` the
    samples already multiplied by the Jackson weights.  ``kernel(gammas, xs)``
    returns (left, right, W): the solutions regular at the left and right
    ends, sampled at xs, and their Wronskian, for an array of gammas.
    """
    return _resolvent_pair(mus, xs, fw, gw, kernel)[0]


def noncompact_kernel(p):
    """Kernel callback for :func:`resolvent_form` on the lattice [-1, inf(z))_q."""
    def kernel(mus, xs):
        g = gamma_from_mu(mus, p)
        g = np.atleast_1d(g)
        f, F = _phi_Phi_points(g, xs, p)
        W = W_gamma(g, p)
        return f, F, np.atleast_1d(W)
    return kernel


def _gl_panels(edges, n=24):
    x, w = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        h = 0.5 * (hi - lo)
        nodes.append(lo + h * (x + 1))
        weights.append(h * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _mu_panels(mu1, mu2, eps, centres):
    """Panel edges on [mu1, mu2], graded geometrically towards each centre."""
    edges = {mu1, mu2}
    for c0 in centres:
        if not mu1 < c0 < mu2:
            continue
        edges.add(c0)
        d = eps / 4
        while d < (mu2 - mu1):
            for s in (-1, 1):
                e = c0 + s * d
                if mu1 < e < mu2:
                    edges.add(e)
            d *= 2
    edges = sorted(edges)
    # split long panels so that no panel is much longer than 1/16 of the interval
    out = [edges[0]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((hi - lo) / ((mu2 - mu1) / 16))))
        out.extend(lo + (hi - lo) * np.arange(1, m + 1) / m)
    return np.array(out)


def stone_lhs(xs, fw, gw, kernel, mu1, mu2, eps_list, centres=()):
    """(1/2 pi i) int_{mu1}^{mu2} <R(mu+i eps) f, g> - <R(mu-i eps) f, g> d mu for each eps,
    and the polynomial (Richardson) extrapolation to eps = 0.

    Returns (extrapolated value, per-eps values).
    """
    vals = []
    for eps in eps_list:
        nodes, weights = _gl_panels(_mu_panels(mu1, mu2, eps, centres))
        # self-adjointness: <R(mu - i eps) f, g> = conj <R(mu + i eps) g, f>
        up, swapped = _resolvent_pair(nodes + 1j * eps, xs, fw, gw, kernel)
        dn = np.conj(swapped)
        vals.append(np.sum(weights * (up - dn)) / (2j * math.pi))
    vals = np.array(vals)
    eps = np.asarray(eps_list, dtype=float)
    V = np.vander(eps, len(eps), increasing=True)
    coef = np.linalg.solve(V, vals)
    return coef[0], vals


def stone_projection_check(f, g, mu1, mu2, p, eps_list=(1e-2, 5e-3, 2.5e-3), measure=None):
    """Stone's formula against the closed-form spectral projection on (mu1, mu2).

    Returns (lhs, rhs, scale) with ``scale = ||f|| ||g||``.  The interval must
    lie inside the continuous band or outside it; it must not contain a band
    edge.
    """
    from .transform import forward
    lo, hi = band(p)
    if not mu1 < mu2:
        raise DomainError("need mu1 < mu2")
    inside = lo <= mu1 and mu2 <= hi
    outside = mu2 <= lo or mu1 >= hi
    if not (inside or outside):
        raise DomainError("the interval contains an end point of the continuous band")
    for edge in (lo, hi):
        if min(abs(mu1 - edge), abs(mu2 - edge)) < 1e-9 and not inside:
            raise DomainError("the interval touches an end point of the continuous band")
    if measure is None:
        measure = SpectralMeasure(p)
    support = np.nonzero((np.abs(f.samples) > 0) | (np.abs(g.samples) > 0))[0]
    x = f.window.x(p)[support]
    w = jackson_weight(x, p)
    fw = f.samples[support] * w
    gw = g.samples[support] * w
    atoms_in = [t for t in measure.atoms if mu1 < t.eigenvalue(p) < mu2]
    centres = [t.eigenvalue(p) for t in atoms_in]
    lhs, _ = stone_lhs(x, fw, gw, noncompact_kernel(p), mu1, mu2, eps_list, centres)
    scale = math.sqrt(abs(np.sum(np.abs(f.samples[support]) ** 2 * w)) * abs(np.sum(np.abs(g.samples[support]) ** 2 * w)))
    if inside:
        # mu = -1 - a^2 + 2a cos(theta) decreases in theta
        t1 = math.acos(max(-1.0, min(1.0, (mu1 + 1 + p.a**2) / (2 * p.a))))
        t2 = math.acos(max(-1.0, min(1.0, (mu2 + 1 + p.a**2) / (2 * p.a))))
        th, wt = _gl_panels(np.linspace(t2, t1, 17), 24)
        gam = np.exp(1j * th)
        Ff = forward(f, gam, p)
        Fg = forward(g, gam, p)
        rhs = np.sum(wt * Ff * np.conj(Fg) * continuous_density(th, p))
    else:
        rhs = 0j
        for t in atoms_in:
            e = phi_atom_scaled(t.gamma, x, p).mul_exp(0.5 * t.log_mass).value()
            rhs += np.sum(fw * np.conj(e)) * np.conj(np.sum(gw * np.conj(e)))
    return complex(lhs), complex(rhs), scale
