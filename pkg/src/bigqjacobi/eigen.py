"""Eigenvalue map and explicit eigenfunctions of L.

Several overlapping series representations exist for each eigenfunction.
Every evaluation runs a cascade over them: each route reports a value and an
error estimate (truncation bound plus ``EPS`` times the absolute term sum,
which exposes cancellation), and the first route whose estimate is below
``ACCEPT`` relative wins; otherwise the best one seen is returned.

Low-level ``_route_*`` and ``*_core`` functions take plain floats and
broadcast over arrays of spectral parameters and points.
"""

import math

import numpy as np

from .lattice import (NEG, POS, LatticeFunction, LatticePoint, apply_L, coeff_A, coeff_B)
from .qseries import (EPS, DomainError, SeriesResult,
                      phi_series, qpoch_finite, qpoch_inf_ratio, is_q_power)

__all__ = [
    "mu", "gamma_from_mu", "in_S_sing", "in_S_sing_plus", "in_S_pol", "in_S_pol_plus",
    "phi", "psi", "phi_values", "psi_values", "phi_lattice", "psi_lattice",
    "dq_phi_formula", "dq_psi_formula", "phi_origin", "psi_origin",
    "phi_asym", "phi_asym_pos_values", "phi_asym_extended", "phi_asym_lattice", "phi_minus",
    "phi_minus_prefactor", "lattice_eigenfunctions", "phi_atom_values", "phi_atom_scaled", "phi_atom_table",
    "big_qjacobi_poly", "big_qjacobi_prefactor", "eigen_residual",
]

TOL = 1e-13
ACCEPT = 1e-12
UNSAFE = 1e-8


# --- eigenvalue and classification ---------------------------------------------------------

def mu(gamma, p):
    """mu(gamma) = -1 - a^2 + a (gamma + 1/gamma)."""
    g = np.asarray(gamma, dtype=complex)
    if np.any(g == 0):
        raise DomainError("gamma = 0 has no eigenvalue")
    val = -1 - p.a**2 + p.a * (g + 1 / g)
    return val[()] if val.ndim == 0 else val


def gamma_from_mu(m, p):
    """The root gamma of mu(gamma) = m with |gamma| <= 1."""
    s = (np.asarray(m, dtype=complex) + 1 + p.a**2) / p.a
    r = np.sqrt(s * s - 4 + 0j)
    g1 = (s + r) / 2
    g2 = (s - r) / 2
    g = np.where(np.abs(g1) <= np.abs(g2), g1, g2)
    return g[()] if g.ndim == 0 else g


def _log_q_offset(u, q):
    """Distance in log-q units from u to the nearest power of q (inf for non-powers)."""
    u = complex(u)
    if u == 0:
        return math.inf, None
    k = np.log(u) / math.log(q)
    kr = round(k.real)
    return abs(k - kr), kr


def in_S_sing_plus(gamma, p, tol=1e-9):
    """gamma in {+-q^{-k/2}, k >= 1}, i.e. gamma^2 = q^{-k}."""
    d, k = _log_q_offset(complex(gamma) ** 2, p.q)
    return d < tol and k <= -1


def in_S_sing(gamma, p, tol=1e-9):
    """gamma in {+-q^{k/2}, k integer}, i.e. gamma^2 a power of q."""
    d, _ = _log_q_offset(complex(gamma) ** 2, p.q)
    return d < tol


def in_S_pol_plus(gamma, p, tol=1e-9):
    d, k = _log_q_offset(complex(gamma) / p.a, p.q)
    return (d < tol and k >= 0), (None if k is None else int(k))


def in_S_pol(gamma, p, tol=1e-9):
    g = complex(gamma)
    return in_S_pol_plus(g, p, tol)[0] or in_S_pol_plus(1 / g, p, tol)[0]


# --- series routes -------------------------------------------------------------------------

def _unsafe_den(v, q):
    """Mask where some factor 1 - v q^j (j >= 0) has modulus below UNSAFE."""
    v = np.asarray(v, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        j = np.round(-np.log(np.abs(v)) / math.log(q))
    out = np.zeros(v.shape, dtype=bool)
    for dj in (-1, 0, 1):
        jj = j + dj
        ok = np.isfinite(jj) & (jj >= 0)
        fac = np.abs(1 - v * q ** np.where(ok, jj, 0))
        out |= ok & (fac < UNSAFE)
    return out


def _series_err(res):
    return np.asarray(res.err_estimate) + 8 * EPS * np.asarray(res.magnitude)


def _route_phiB(g, x, a, b, c, q):
    """Defining series 3phi2(ag, a/g, -1/x; ab, ac; q, -bcx)."""
    arg = -b * c * x
    ok = (np.abs(arg) < 0.85) | _terminates(-1 / x, q)
    val = np.full(g.shape, np.nan + 0j)
    err = np.full(g.shape, np.inf)
    if np.any(ok):
        r = phi_series([a * g[ok], a / g[ok], -1 / x[ok]], [a * b, a * c], q, arg[ok], tol=TOL, raise_on_fail=False)
        val[ok] = r.value
        err[ok] = _series_err(r)
    return ok, val, err


def _terminates(u, q):
    u = np.asarray(u, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(u) / math.log(q)
    kr = np.round(k.real)
    return (np.abs(k - kr) < 1e-9) & (kr <= 0)


def _route_ancontB(g, x, a, b, c, q):
    """Continuation through (ag, bc, -abcx/g)/(ab, ac, -bcx) 3phi2(b/g, c/g, -bcx; bc, -abcx/g; q, ag)."""
    w = -a * b * c * x / g
    ok = (np.abs(a * g) < 0.9) & ~_unsafe_den(w, q) & ~_unsafe_den(-b * c * x + 0j, q)
    ok &= ~_unsafe_den(np.full(g.shape, b * c + 0j), q)
    val = np.full(g.shape, np.nan + 0j)
    err = np.full(g.shape, np.inf)
    if np.any(ok):
        gg, xx, ww = g[ok], x[ok], w[ok]
        r = phi_series([b / gg, c / gg, -b * c * xx], [b * c, ww], q, a * gg, tol=TOL, raise_on_fail=False)
        pref = qpoch_inf_ratio([a * gg, np.full(gg.shape, b * c), ww], [np.full(gg.shape, a * b), np.full(gg.shape, a * c), -b * c * xx], q)
        val[ok] = pref * r.value
        err[ok] = np.abs(pref) * _series_err(r) + 64 * EPS * np.abs(val[ok])
    return ok, val, err


def _route_ancontB2(g, x, a, b, c, q):
    """(bg, -abcx/g)/(ab, -bcx) 3phi2(a/g, c/g, -acx; ac, -abcx/g; q, bg)."""
    w = -a * b * c * x / g
    ok = (np.abs(b * g) < 0.9) & ~_unsafe_den(w, q) & ~_unsafe_den(-b * c * x + 0j, q)
    val = np.full(g.shape, np.nan + 0j)
    err = np.full(g.shape, np.inf)
    if np.any(ok):
        gg, xx, ww = g[ok], x[ok], w[ok]
        r = phi_series([a / gg, c / gg, -a * c * xx], [a * c, ww], q, b * gg, tol=TOL, raise_on_fail=False)
        pref = qpoch_inf_ratio([b * gg, ww], [np.full(gg.shape, a * b), -b * c * xx], q)
        val[ok] = pref * r.value
        err[ok] = np.abs(pref) * _series_err(r) + 64 * EPS * np.abs(val[ok])
    return ok, val, err


def G_alt(g, x, a, b, c, q):
    """Phi^x_g(x), the k = 0 value of the large-x representation; returns (value, err, ok)."""
    g = np.asarray(g, dtype=complex)
    x = np.asarray(x, dtype=float)
    g, x = np.broadcast_arrays(g, x)
    arg = -q / (b * c * x)
    ok = (x > 0) & (np.abs(arg) < 0.85) & ~_unsafe_den(q * g**2, q) & ~_unsafe_den(-q * g / (a * x), q)
    val = np.full(g.shape, np.nan + 0j)
    err = np.full(g.shape, np.inf)
    if np.any(ok):
        gg, xx = g[ok], x[ok]
        r = phi_series([q * gg / a, b * gg, c * gg], [-q * gg / (a * xx), q * gg**2], q, arg[ok], tol=TOL, raise_on_fail=False)
        pref = qpoch_inf_ratio([-q / (b * c * xx), -q * gg / (a * xx)], [-q / (a * b * xx), -q / (a * c * xx)], q)
        val[ok] = pref * r.value
        err[ok] = np.abs(pref) * _series_err(r) + 64 * EPS * np.abs(val[ok])
    return val, err, ok


def G_B(g, x, a, b, c, q):
    """Phi^x_g(x) through the minimal-solution series with argument a g; also valid for x < 0."""
    g = np.asarray(g, dtype=complex)
    x = np.asarray(x, dtype=float)
    g, x = np.broadcast_arrays(g, x)
    u1 = -q * g / (a * x)
    u2 = -q * q * g / (a * b * c * x)
    ok = (np.abs(a * g) < 0.95) & ~_unsafe_den(q * g**2, q) & ~_unsafe_den(u1, q) & ~_unsafe_den(u2, q)
    val = np.full(g.shape, np.nan + 0j)
    err = np.full(g.shape, np.inf)
    if np.any(ok):
        gg, xx = g[ok], x[ok]
        v1, v2 = u1[ok], u2[ok]
        r = phi_series([q * gg / a, -q / (a * b * xx), -q / (a * c * xx)], [v1, v2], q, a * gg, tol=TOL, raise_on_fail=False)
        pref = qpoch_inf_ratio([v1, v2, a * gg], [-q / (a * b * xx) + 0 * gg, -q / (a * c * xx) + 0 * gg, q * gg**2], q)
        val[ok] = pref * r.value
        err[ok] = np.abs(pref) * _series_err(r) + 64 * EPS * np.abs(val[ok])
    return val, err, ok


def _route_connection(g, x, a, b, c, q):
    """phi = c(g) Phi_g + c(1/g) Phi_{1/g} with both Phi taken at base x (so k = 0)."""
    from .cfun import c_raw
    g2 = g * g
    ok = (x > 0) & ~_unsafe_den(1 / g2, q) & ~_unsafe_den(q * g2, q) & ~_unsafe_den(q / g2, q)
    ok &= np.abs(1 - g2) > 1e-6
    ok &= np.abs(q / (b * c * x)) < 0.85
    val = np.full(g.shape, np.nan + 0j)
    err = np.full(g.shape, np.inf)
    if np.any(ok):
        gg, xx = g[ok], x[ok]
        Gp, ep, okp = G_alt(gg, xx, a, b, c, q)
        Gm, em, okm = G_alt(1 / gg, xx, a, b, c, q)
        cp = c_raw(gg, a, b, c, q, xx, raise_pole=False)
        cm = c_raw(1 / gg, a, b, c, q, xx, raise_pole=False)
        t1 = np.where(cp == 0, 0, cp * Gp)
        t2 = np.where(cm == 0, 0, cm * Gm)
        v = t1 + t2
        e = (np.where(cp == 0, 0, np.abs(cp) * ep) + np.where(cm == 0, 0, np.abs(cm) * em)
             + 128 * EPS * (np.abs(t1) + np.abs(t2)))
        good = np.isfinite(v) & np.isfinite(e)
        sub = np.nonzero(ok)[0]
        val[sub[good]] = v[good]
        err[sub[good]] = e[good]
        ok[sub[~good]] = False
    return ok, val, err


def _cascade(g, x, routes):
    g = np.asarray(g, dtype=complex)
    x = np.asarray(x, dtype=float)
    g, x = np.broadcast_arrays(g, x)
    shape = g.shape
    gf = g.ravel().copy()
    xf = x.ravel().copy()
    best = np.full(gf.shape, np.nan + 0j)
    besterr = np.full(gf.shape, np.inf)
    todo = np.ones(gf.shape, dtype=bool)
    for route in routes:
        idx = np.nonzero(todo)[0]
        if idx.size == 0:
            break
        ok, val, err = route(gf[idx], xf[idx])
        better = ok & np.isfinite(val) & (err < besterr[idx])
        best[idx[better]] = val[better]
        besterr[idx[better]] = err[better]
        good = besterr[idx] <= ACCEPT * np.maximum(np.abs(best[idx]), 1e-300)
        todo[idx[good]] = False
    return best.reshape(shape), besterr.reshape(shape)


def phi_core(g, x, a, b, c, q):
    """phi_g(x; a, b, c) for arrays g (complex) and x (real); returns (value, err)."""
    g = np.asarray(g, dtype=complex)
    if np.any(g == 0):
        raise DomainError("gamma = 0 is not admissible")
    g = np.where(np.abs(g) > 1, 1 / g, g)
    routes = [
        lambda gg, xx: _route_phiB(gg, xx, a, b, c, q),
        lambda gg, xx: _route_connection(gg, xx, a, b, c, q),
        lambda gg, xx: _route_ancontB(gg, xx, a, b, c, q),
        lambda gg, xx: _route_ancontB(1 / gg, xx, a, b, c, q),
        lambda gg, xx: _route_ancontB2(gg, xx, a, b, c, q),
        lambda gg, xx: _route_ancontB2(1 / gg, xx, a, b, c, q),
    ]
    return _cascade(g, x, routes)


def psi_core(g, x, a, b, c, q):
    """psi_g(x; a, b, c) = phi_g(bcx/q; a, q/b, q/c)."""
    x = np.asarray(x, dtype=float)
    return phi_core(g, b * c * x / q, a, q / b, q / c, q)


def _finish(val, err, what):
    if np.any(~np.isfinite(val)) or np.any(~np.isfinite(err)):
        raise DomainError(f"no valid representation of {what} at the requested arguments")
    return val


def _x_of(x, p):
    if isinstance(x, LatticePoint):
        return x.value(p)
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], LatticePoint):
        return np.array([pt.value(p) for pt in x])
    return x


def phi_values(gamma, x, p):
    """Array version of phi: broadcasts gamma against real x (values or LatticePoints)."""
    val, err = phi_core(gamma, _x_of(x, p), p.a, p.b, p.c, p.q)
    return _finish(val, err, "phi"), err


def psi_values(gamma, x, p):
    val, err = psi_core(gamma, _x_of(x, p), p.a, p.b, p.c, p.q)
    return _finish(val, err, "psi"), err


def phi(gamma, x, p):
    """phi_gamma(x), the eigenfunction normalised by phi(-1) = 1."""
    val, err = phi_values(gamma, x, p)
    return SeriesResult(val[()] if np.ndim(val) == 0 else val, err[()] if np.ndim(err) == 0 else err, 0)


def psi(gamma, x, p):
    """psi_gamma(x), the second eigenfunction, via the parameter swap (a, q/b, q/c; bcx/q)."""
    val, err = psi_values(gamma, x, p)
    return SeriesResult(val[()] if np.ndim(val) == 0 else val, err[()] if np.ndim(err) == 0 else err, 0)


def phi_lattice(gamma, window, p):
    return LatticeFunction(window, phi_values(gamma, window.x(p), p)[0])


def psi_lattice(gamma, window, p):
    return LatticeFunction(window, psi_values(gamma, window.x(p), p)[0])


# --- derivatives and the origin ------------------------------------------------------------

def dq_phi_formula(gamma, x, p):
    """(D_q phi_g)(x) = bc mu / ((1-q)(1-ab)(1-ac)) phi_g(x; qa, b, c)."""
    a, b, c, q = p.a, p.b, p.c, p.q
    if abs(1 - a * b) < 1e-14 or abs(1 - a * c) < 1e-14:
        raise DomainError("ab = 1 or ac = 1")
    fac = b * c * mu(gamma, p) / ((1 - q) * (1 - a * b) * (1 - a * c))
    val, err = phi_core(gamma, _x_of(x, p), q * a, b, c, q)
    return fac * _finish(val, err, "phi")


def dq_psi_formula(gamma, x, p):
    """(D_q psi_g)(x) = q mu / ((1-q)(1-qa/b)(1-qa/c)) psi_g(x; qa, b, c)."""
    a, b, c, q = p.a, p.b, p.c, p.q
    if abs(1 - q * a / b) < 1e-14 or abs(1 - q * a / c) < 1e-14:
        raise DomainError("qa/b = 1 or qa/c = 1")
    fac = q * mu(gamma, p) / ((1 - q) * (1 - q * a / b) * (1 - q * a / c))
    val, err = psi_core(gamma, _x_of(x, p), q * a, b, c, q)
    return fac * _finish(val, err, "psi")


def _origin(g, a, b, c, q):
    m = -1 - a * a + a * (g + 1 / g)
    v = phi_series([a * g, a / g], [a * b, a * c], q, b * c, tol=TOL)
    d = phi_series([q * a * g, q * a / g], [q * a * b, q * a * c], q, b * c, tol=TOL)
    return v.value, b * c * m / ((1 - q) * (1 - a * b) * (1 - a * c)) * d.value


def phi_origin(gamma, p):
    """(phi_g(0), phi_g'(0)) from the 2phi2 expressions."""
    return _origin(complex(gamma), p.a, p.b, p.c, p.q)


def psi_origin(gamma, p):
    """(psi_g(0), psi_g'(0)) = (phi_g(0; a, q/b, q/c), (bc/q) phi_g'(0; a, q/b, q/c))."""
    q = p.q
    v, d = _origin(complex(gamma), p.a, q / p.b, q / p.c, q)
    return v, p.b * p.c / q * d


# --- the asymptotic solution ---------------------------------------------------------------

def _check_sing_plus(g, p):
    gs = np.atleast_1d(np.asarray(g, dtype=complex))
    for gi in gs:
        if in_S_sing_plus(gi, p):
            raise DomainError(f"gamma={gi} lies in S_sing^+")


def phi_asym_pos_values(gamma, ks, p, y_base=None, route="auto"):
    """Phi^y_g(y q^k) for a contiguous or arbitrary set of integers ``ks``.

    Returns (values, err) with shape broadcast(gamma) + (len(ks),).  Points
    where the large-x series is valid use it directly; smaller points are
    reached by running the eigenvalue recurrence downward from the two
    smallest valid points.  ``route="B"`` forces the minimal-solution series.
    """
    a, b, c, q = p.a, p.b, p.c, p.q
    y = p.z if y_base is None else y_base
    g = np.asarray(gamma, dtype=complex)
    _check_sing_plus(g, p)
    ks = np.asarray(ks, dtype=int)
    gcol = g[..., None]
    if route == "B":
        xs = y * q ** ks.astype(float)
        val, err, ok = G_B(gcol, xs, a, b, c, q)
        if not np.all(ok):
            raise DomainError("minimal-solution series needs |a gamma| < 1")
        scale = (a * gcol) ** (-ks)
        return val * scale, err * np.abs(scale)
    # largest k (smallest x) at which the large-x series is still comfortable
    k_alt = math.floor(math.log(q / (0.8 * b * c * y)) / math.log(q))
    kmax = int(ks.max())
    kmin = int(ks.min())
    top = min(kmin, k_alt - 1)  # the recurrence needs two seeds
    kk = np.arange(top, max(kmax, top) + 1)
    xs = y * q ** kk.astype(float)
    vals = np.zeros(g.shape + kk.shape, dtype=complex)
    errs = np.zeros(g.shape + kk.shape)
    direct = kk <= k_alt
    v, e, ok = G_alt(gcol, xs[direct], a, b, c, q)
    if not np.all(ok):
        raise DomainError("large-x series unusable (gamma too close to S_sing)")
    scale = (a * gcol) ** (-kk[direct])
    vals[..., direct] = v * scale
    errs[..., direct] = e * np.abs(scale)
    n_direct = int(direct.sum())
    m = mu(g, p)[..., None] if np.ndim(g) else mu(g, p)
    for i in range(n_direct, kk.size):
        # solve the eigen equation at x = y q^{k-1} for the value at q x
        x = xs[i - 1]
        A = coeff_A(x, p)
        B = coeff_B(x, p)
        f0 = vals[..., i - 1]
        fm = vals[..., i - 2]
        mm = m if np.ndim(m) == 0 else m[..., 0]
        vals[..., i] = f0 + (mm * f0 - B * (fm - f0)) / A
        errs[..., i] = errs[..., i - 1] + 4 * EPS * np.abs(vals[..., i])
    pos = {int(k): i for i, k in enumerate(kk)}
    sel = np.array([pos[int(k)] for k in ks])
    return vals[..., sel], errs[..., sel]


def phi_asym(gamma, pt, p, y_base=None, route="auto"):
    """Phi^y_gamma(x) at a Pos-branch point x = y q^k (y = z by default)."""
    if pt.branch != POS:
        raise DomainError("phi_asym is defined on the Pos branch; use phi_asym_extended")
    v, e = phi_asym_pos_values(complex(gamma), [pt.k], p, y_base, route)
    return SeriesResult(complex(v[0]), float(e[0]), 0)


def _anext_values(n, x, p):
    """Phi at gamma_n = a q^n on arbitrary real x via residues, derivatives and M_n."""
    from .cfun import K_raw
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    gn = a * q**n
    sw = (a, q / b, q / c, q, b * c * z / q)
    # residues by a 64-point trapezoid on a small circle
    r = min(1e-3, 0.5 * gn * (1 - q)) * 0.5
    t = np.exp(2j * np.pi * (np.arange(64) + 0.5) / 64)
    ring = gn + r * t
    resK = np.mean(K_raw(ring, a, b, c, q, z, raise_pole=False) * r * t)
    resKt = np.mean(K_raw(ring, *sw, raise_pole=False) * r * t)
    # M_n = lim M_n(gamma): the circle mean of an analytic function gives the centre value
    pre = big_qjacobi_prefactor(n, p)
    Mring = pre * K_raw(ring, a, b, c, q, z, raise_pole=False) + K_raw(ring, *sw, raise_pole=False)
    Mn = np.mean(Mring)
    x = np.asarray(x, dtype=float)

    def dgamma(fn):
        def central(h):
            return (fn(gn + h, x) - fn(gn - h, x)) / (2 * h)
        h = 1e-5 * abs(gn)
        return (4 * central(h / 2) - central(h)) / 3

    dphi = dgamma(lambda gg, xx: phi_core(gg, xx, a, b, c, q)[0])
    dpsi = dgamma(lambda gg, xx: psi_core(gg, xx, a, b, c, q)[0])
    # the finite part pairs with psi: phi_{g_n} = pre psi_{g_n}, so M_n phi would be off by pre
    base = psi_core(gn, x, a, b, c, q)[0]
    return resK * dphi + Mn * base + resKt * dpsi


def phi_asym_extended(gamma, x, p):
    """Phi_gamma on all of I: K phi + K~ psi, or the residue formula at gamma = a q^n."""
    from .cfun import K_raw
    g = complex(gamma)
    if in_S_sing_plus(g, p):
        raise DomainError(f"gamma={g} lies in S_sing^+")
    xv = np.asarray(_x_of(x, p), dtype=float)
    hit, n = in_S_pol_plus(g, p)
    if hit:
        # the residue formula cancels badly for large x; z-lattice points use the analytic series
        flat = np.atleast_1d(xv).astype(float)
        ks = [is_q_power(xi / p.z, p.q) if xi > 0 else None for xi in flat]
        on = np.array([k is not None for k in ks])
        val = np.zeros(flat.shape, dtype=complex)
        if np.any(on):
            val[on] = phi_asym_pos_values(g, [k for k in ks if k is not None], p)[0]
        if np.any(~on):
            val[~on] = _anext_values(n, flat[~on], p)
        val = val.reshape(np.shape(xv))
        return val[()] if np.ndim(val) == 0 else val
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    K = K_raw(g, a, b, c, q, z)
    Kt = K_raw(g, a, q / b, q / c, q, b * c * z / q)
    f = _finish(*phi_core(g, xv, a, b, c, q), "phi")
    h = _finish(*psi_core(g, xv, a, b, c, q), "psi")
    val = K * f + Kt * h
    return val[()] if np.ndim(val) == 0 else val


def phi_asym_lattice(gamma, window, p):
    """Phi_gamma on a whole window: large-x series and recurrence on Pos, extension on Neg."""
    g = complex(gamma)
    pos_ks = np.arange(window.k_max_pos, window.k_min_pos - 1, -1)
    posv, _ = phi_asym_pos_values(g, pos_ks, p)
    negx = window.x(p)[: window.n_neg]
    negv = phi_asym_extended(g, negx, p)
    return LatticeFunction(window, np.concatenate([np.atleast_1d(negv), posv]))


def lattice_eigenfunctions(gammas, window, p):
    """phi, psi and Phi for many gammas on one window, as arrays of shape (len(gammas), len(window)).

    One broadcast evaluation per function, so this is much cheaper than
    looping over the single-gamma helpers.  Phi on the Neg branch is
    K phi + K~ psi, or the residue formula at gamma = a q^n.
    """
    from .cfun import K_raw
    g = np.atleast_1d(np.asarray(gammas, dtype=complex))
    _check_sing_plus(g, p)
    x = window.x(p)
    nn = window.n_neg
    f = _finish(*phi_core(g[:, None], x[None, :], p.a, p.b, p.c, p.q), "phi")
    h = _finish(*psi_core(g[:, None], x[None, :], p.a, p.b, p.c, p.q), "psi")
    pos_ks = np.arange(window.k_max_pos, window.k_min_pos - 1, -1)
    F = np.empty_like(f)
    F[:, nn:] = phi_asym_pos_values(g, pos_ks, p)[0]
    pol = np.array([in_S_pol_plus(gi, p)[0] for gi in g])
    if np.any(~pol):
        gg = g[~pol]
        K = K_raw(gg, p.a, p.b, p.c, p.q, p.z)
        Kt = K_raw(gg, p.a, p.q / p.b, p.q / p.c, p.q, p.b * p.c * p.z / p.q)
        F[~pol, :nn] = K[:, None] * f[~pol, :nn] + Kt[:, None] * h[~pol, :nn]
    for i in np.nonzero(pol)[0]:
        F[i, :nn] = phi_asym_extended(g[i], x[:nn], p)
    return f, h, F


def phi_minus(gamma, pt, p):
    """Phi^-_gamma(-q^k): the minimal-solution series with base y = -1."""
    if pt.branch != NEG:
        raise DomainError("phi_minus lives on the Neg branch")
    g = complex(gamma)
    if abs(p.a * g) >= 1:
        raise DomainError("phi_minus needs |a gamma| < 1")
    _check_sing_plus(g, p)
    x = pt.value(p)
    v, e, ok = G_B(g, x, p.a, p.b, p.c, p.q)
    if not ok:
        raise DomainError("minimal-solution series unsafe at this gamma")
    s = (p.a * g) ** (-pt.k)
    return SeriesResult(complex(v * s), float(e * abs(s)), 0)


def phi_minus_prefactor(gamma, p):
    """(qg/a, qg/b, qg/c)_inf / (q/ab, q/ac, qg^2)_inf, the ratio Phi^- / phi on the Neg branch."""
    a, b, c, q = p.a, p.b, p.c, p.q
    g = complex(gamma)
    return complex(qpoch_inf_ratio([q * g / a, q * g / b, q * g / c], [q / (a * b), q / (a * c), q * g * g], q))


def _march(f0, f1, xs, m, p):
    """Run the eigen equation from values at xs[0], xs[1] (with xs[i+1] = q xs[i]) over all of xs.

    Values are kept as mantissa times exp(log); the mantissas are
    renormalized at every step, so neither overflow nor underflow occurs.
    Returns (mantissas, logs).
    """
    n = len(xs)
    mant = np.empty(n, dtype=complex)
    logs = np.zeros(n)
    mant[0], mant[1] = f0, f1
    A = coeff_A(xs, p)
    B = coeff_B(xs, p)
    prev, cur, lg = complex(f0), complex(f1), 0.0
    for i in range(2, n):
        new = cur + (m * cur - B[i - 1] * (prev - cur)) / A[i - 1]
        s = abs(new) or 1.0
        prev, cur = cur / s, new / s
        lg += math.log(s)
        mant[i], logs[i] = cur, lg
    return mant, logs


def phi_atom_table(gamma, p, k_neg, k_pos_min, k_pos_max):
    """log phi at a zero gamma of c(1/.) (|gamma| < 1) over whole index ranges.

    Returns complex logarithms on the Neg indices 0..k_neg and the Pos
    indices k_pos_min..k_pos_max.  On the Neg branch phi grows towards the
    origin faster than any other solution, so the eigen equation is run
    forward from phi(-1) = 1.  On the Pos branch phi = c(gamma) Phi_gamma
    there, and Phi is run downward from the large-x series.  For tiny
    |gamma| the values leave the double range near the origin, which the
    logarithms absorb; the defining series would cancel catastrophically.
    """
    from .cfun import c_scaled
    g = complex(gamma)
    if not 0 < abs(g) < 1:
        raise DomainError("phi_atom_table needs 0 < |gamma| < 1")
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    m = complex(mu(g, p))
    kn = max(int(k_neg), 1)
    xs = -(q ** np.arange(kn + 1, dtype=float))
    mn, ln = _march(1.0, 1 + m / coeff_A(-1.0, p), xs, m, p)
    neg = (np.log(mn) + ln)[: int(k_neg) + 1]
    k_alt = math.floor(math.log(q / (0.8 * b * c * z)) / math.log(q))
    top = min(int(k_pos_min), k_alt - 1)
    bottom = max(int(k_pos_max), top + 1)
    v, _, ok = G_alt(g, z * q ** np.array([top, top + 1], dtype=float), a, b, c, q)
    if not np.all(ok):
        raise DomainError("large-x series unusable at this gamma")
    # Phi(z q^k) = G_alt(z q^k) (a g)^(-k); march relative to the first seed
    lag = np.log(a * g)
    kk = np.arange(top, bottom + 1)
    mp_, lp = _march(1.0, v[1] / v[0] * np.exp(-lag), z * q ** kk.astype(float), m, p)
    cg = c_scaled(g, a, b, c, q, z)
    base = np.log(v[0]) - top * lag + np.log(cg.m) + cg.e * math.log(2)
    pos = (base + lp + np.log(mp_))[int(k_pos_min) - top: int(k_pos_max) - top + 1]
    return neg, pos


def phi_atom_scaled(gamma, x, p):
    """phi at a zero gamma of c(1/.) on lattice points, as a mantissa/exponent pair.

    See :func:`phi_atom_table` for the method.
    """
    from .qseries import _Scaled
    x = np.atleast_1d(np.asarray(_x_of(x, p), dtype=float))
    ks = _lattice_indices(x, p)
    neg = x < 0
    kn = int(ks[neg].max()) if np.any(neg) else 0
    kp = ks[~neg] if np.any(~neg) else np.array([0])
    ln, lp = phi_atom_table(gamma, p, kn, int(kp.min()), int(kp.max()))
    logs = np.empty(x.shape, dtype=complex)
    logs[neg] = ln[ks[neg]]
    logs[~neg] = lp[ks[~neg] - int(kp.min())]
    return _Scaled(np.ones(x.shape), np.zeros(x.shape, dtype=np.int64)).mul_exp(logs)


def _lattice_indices(x, p):
    ks = np.empty(x.shape, dtype=np.int64)
    for i, xi in enumerate(x):
        k = is_q_power(-xi if xi < 0 else xi / p.z, p.q)
        if k is None:
            raise DomainError(f"{xi} is not a lattice point")
        ks[i] = k
    return ks


def phi_atom_values(gamma, x, p):
    """Plain values of :func:`phi_atom_scaled`."""
    return np.atleast_1d(phi_atom_scaled(gamma, x, p).value())


# --- polynomial case -----------------------------------------------------------------------

def big_qjacobi_prefactor(n, p):
    """(qa/b, qa/c)_n / (ab, ac)_n (bc/q)^n, the ratio phi_{g_n} / psi_{g_n}."""
    a, b, c, q = p.a, p.b, p.c, p.q
    num = qpoch_finite(q * a / b, q, n) * qpoch_finite(q * a / c, q, n)
    den = qpoch_finite(a * b, q, n) * qpoch_finite(a * c, q, n)
    if den == 0:
        raise DomainError("(ab;q)_n or (ac;q)_n vanishes")
    return complex(num / den * (b * c / q) ** n).real


def big_qjacobi_poly(n, x, p, route="jacobi"):
    """phi_{a q^n}(x), a polynomial of degree n in x; x may be any complex number.

    ``route="jacobi"`` uses the terminating 3phi2(q^-n, -abx, q^n a^2; ab, qa/c; q, q)
    with its prefactor; ``route="phi"`` sums the defining series, which
    terminates at gamma = a q^n.
    """
    a, b, c, q = p.a, p.b, p.c, p.q
    n = int(n)
    if n < 0:
        raise DomainError("degree must be non-negative")
    x = np.asarray(x, dtype=complex)
    if qpoch_finite(a * b, q, n) == 0 or qpoch_finite(a * c, q, n) == 0:
        raise DomainError("(ab;q)_n or (ac;q)_n vanishes")
    if route == "phi":
        # (-1/x;q)_k (-bcx)^k = (-bc)^k prod_{j<k}(x + q^j): no division by x
        out = np.zeros(x.shape, dtype=complex)
        term = np.ones(x.shape, dtype=complex)
        g = a * q**n
        for k in range(n + 1):
            out = out + term
            term = term * (1 - a * g * q**k) * (1 - a / g * q**k) * (-b * c) * (x + q**k) / (
                (1 - a * b * q**k) * (1 - a * c * q**k) * (1 - q ** (k + 1)))
        return out[()] if out.ndim == 0 else out
    if qpoch_finite(q * a / c, q, n) == 0:
        raise DomainError("(qa/c;q)_n vanishes")
    pre = qpoch_finite(q * a / c, q, n) / qpoch_finite(a * c, q, n) * (-c / (a * q ** ((n + 1) / 2))) ** n
    out = np.zeros(x.shape, dtype=complex)
    term = np.ones(x.shape, dtype=complex)
    for k in range(n + 1):
        out = out + term
        term = term * (1 - q ** (k - n)) * (1 + a * b * x * q**k) * (1 - a * a * q ** (n + k)) * q / (
            (1 - a * b * q**k) * (1 - q * a / c * q**k) * (1 - q ** (k + 1)))
    val = pre * out
    return val[()] if val.ndim == 0 else val


# --- diagnostics ---------------------------------------------------------------------------

def eigen_residual(f, gamma, p, include_endpoint=True, scale="stencil", pos_only=False):
    """Maximum relative residual of L f = mu(gamma) f over the interior of f's window.

    ``scale="stencil"`` divides |L f - mu f| by the sum of the moduli of the
    terms that form it, |A|(|f(qx)| + |f|) + |B|(|f(x/q)| + |f|) + |mu f|,
    which is the size of the rounding error the difference can carry.
    ``scale="unit"`` divides by 1 + |mu f|; near x = 0 the coefficients grow
    like 1/x^2 and that form measures cancellation, not accuracy.
    """
    from .lattice import _stencil
    Lf = apply_L(f, p)
    m = mu(gamma, p)
    _, inner, idx, x, up, down = _stencil(f, p)
    s = f.samples
    fi = s[idx]
    res = np.abs(Lf.samples - m * fi)
    if scale == "stencil":
        interior = down >= 0
        fdown = np.where(interior, np.abs(s[np.where(interior, down, 0)]) + np.abs(fi), 0.0)
        den = np.abs(coeff_A(x, p)) * (np.abs(s[up]) + np.abs(fi)) + np.abs(coeff_B(x, p)) * fdown + np.abs(m * fi)
        res = res / np.maximum(den, 1e-300)
    elif scale == "unit":
        res = res / (1 + np.abs(m * fi))
    else:
        raise ValueError(f"unknown scale {scale!r}")
    if pos_only:
        res = res[inner.n_neg:]
    elif not include_endpoint:
        res = res[1:]
    return float(np.max(res))
