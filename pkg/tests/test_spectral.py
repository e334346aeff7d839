import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from bigqjacobi.eigen import mu, phi_lattice, phi_asym_lattice
from bigqjacobi.lattice import (
    LatticeFunction, LatticeWindow, Parameters, _stencil, apply_L, coeff_A, coeff_B, const_K, random_parameters,
)
from bigqjacobi.qseries import DomainError
from bigqjacobi.spectral import (
    DiscreteAtom, SpectralMeasure, aw_residue, aw_weight, band, const_M, continuous_density, discrete_mass,
    discrete_set_S, green_apply, green_kernel, mass_closed_form, mass_log, mass_residue, relplanch_residual,
    spectral_measure, stone_projection_check,
)

from conftest import rel

P0 = Parameters(0.5, 0.4, 0.5, 0.6, 1.0)
P2 = Parameters(0.6, 0.3, 0.7, 0.45, 1.3)
DRAWS = random_parameters(np.random.default_rng(11), 4)


def _mp_theta(x, q):
    return mp.qp(x, q) * mp.qp(q / x, q)


def _mp_c(g, p):
    q, a, b, c, z = (mp.mpf(v) for v in (p.q, p.a, p.b, p.c, p.z))
    g = mp.mpc(g)
    num = mp.qp(a / g, q) * mp.qp(b / g, q) * mp.qp(c / g, q) * _mp_theta(-q / (a * b * c * z * g), q)
    den = mp.qp(a * b, q) * mp.qp(a * c, q) * _mp_theta(-b * c * z, q) * mp.qp(1 / g ** 2, q)
    return num / den


def _mp_K(p):
    return mp.mpf(const_K(p, route="product"))


def _mp_contour(fn, centre, radius, nodes=64):
    t = [mp.expjpi(2 * (j + mp.mpf(1) / 2) / nodes) for j in range(nodes)]
    return sum(fn(centre + radius * tj) * radius * tj for tj in t) / nodes


class TestConstM:
    @pytest.mark.parametrize("p", [P0, P2] + DRAWS)
    def test_routes(self, p):
        assert rel(const_M(p, route="explicit"), const_M(p)) < 1e-12

    @pytest.mark.parametrize("p", DRAWS)
    def test_positive(self, p):
        assert const_M(p) > 0

    @pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
    def test_finite_in_z(self, z):
        v = const_M(Parameters(0.5, 0.4, 0.5, 0.6, z))
        assert math.isfinite(v) and v > 0

    def test_unknown_route(self):
        with pytest.raises(ValueError):
            const_M(P0, route="nope")


class TestDiscreteSet:
    def test_pos_family_single(self):
        p = Parameters(0.5, 1.6, 0.3, 0.4, 1.0)
        pos = [t for t in discrete_set_S(p) if t.family == "pos"]
        assert len(pos) == 1
        assert (pos[0].e, pos[0].k) == ("a", 0)
        assert pos[0].gamma == pytest.approx(1 / 1.6, rel=1e-15)

    @pytest.mark.parametrize("p", [P0, P2] + DRAWS)
    def test_no_pos_family_for_small_parameters(self, p):
        assert all(t.family == "neg" for t in discrete_set_S(p))

    def test_z_shift_relabels_neg(self):
        A = {round(t.gamma, 14): t.k for t in discrete_set_S(P0, mass_floor=1e-30)}
        B = {round(t.gamma, 14): t.k for t in discrete_set_S(Parameters(0.5, 0.4, 0.5, 0.6, 1.0 / 0.5), mass_floor=1e-30)}
        # z -> z/q is the inverse of this relabeling; check both ways on the common atoms
        common = set(A) & set(B)
        assert len(common) >= 4
        assert all(A[g] == B[g] + 1 for g in common)

    @pytest.mark.parametrize("p", [P0, P2] + DRAWS)
    def test_in_unit_disc_and_sorted(self, p):
        S = discrete_set_S(p)
        g = np.array([t.gamma for t in S])
        assert np.all(np.abs(g) < 1) and np.all(g != 0)
        assert np.all(np.diff(np.abs(g)) <= 0)

    def test_neg_family_formula(self):
        s = P2.a * P2.b * P2.c * P2.z
        for t in discrete_set_S(P2):
            assert t.gamma == pytest.approx(-s / P2.q ** (t.k + 1), rel=1e-14)

    def test_without_masses(self):
        assert all(math.isnan(t.mass) for t in discrete_set_S(P2, with_masses=False))

    def test_depth_extends_list(self):
        assert len(discrete_set_S(P2, depth=40)) >= len(discrete_set_S(P2))

    def test_outside_V(self):
        with pytest.raises(DomainError):
            discrete_set_S(Parameters(0.5, 2.0, 0.6, 0.4, 1.0))

    def test_eigenvalue_real(self):
        t = discrete_set_S(P2)[0]
        assert t.eigenvalue(P2) == pytest.approx(mu(t.gamma, P2).real)
        lo, hi = band(P2)
        assert not lo <= t.eigenvalue(P2) <= hi


AW_T = [(0.35, 0.55, -0.23, 0.62), (0.45, 0.7, 0.27, -0.41), (1.4, 0.3, 0.21, 0.53)]
# one parameter above 1 with t_i t_j < 1; its poles e q^k outside the unit circle carry mass
AW_MASSIVE = [(2.5, 0.3, 0.21, 0.35), (1.4, 0.3, 0.21, 0.53), (3.1, -0.2, 0.25, 0.31)]


class TestAskeyWilson:
    @pytest.mark.parametrize("t", AW_T)
    @pytest.mark.parametrize("x", [0.4 + 0.7j, 1.3 - 0.2j, cmath.exp(0.8j)])
    def test_inversion_symmetry(self, t, x):
        assert rel(aw_weight(1 / x, t, 0.5), aw_weight(x, t, 0.5)) < 1e-12

    @pytest.mark.parametrize("t", AW_T)
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_residue_vs_contour(self, t, k):
        q = 0.5
        mt = [mp.mpf(v) for v in t]
        mq = mp.mpf(q)

        def delta_over_x(x):
            num = mp.qp(x * x, mq) * mp.qp(1 / (x * x), mq)
            den = 1
            for tj in mt:
                den *= mp.qp(tj * x, mq) * mp.qp(tj / x, mq)
            return num / den / x

        e = t[0]
        pole = mp.mpf(e) * mq**k
        res = _mp_contour(delta_over_x, pole, mp.mpf(1e-3) * abs(pole))
        assert rel(aw_residue(0, k, t, q), complex(res)) < 1e-8

    @pytest.mark.parametrize("t", AW_MASSIVE)
    def test_positive(self, t):
        q = 0.5
        ks = [k for k in range(6) if t[0] * q**k > 1]
        assert ks
        assert all(aw_residue(0, k, t, q) > 0 for k in ks)

    def test_negative_k(self):
        with pytest.raises(DomainError):
            aw_residue(0, -1, AW_T[0], 0.5)


def _printed_neg_mass(atom, p):
    """Literal transcription of the printed Neg-family mass display."""
    a, b, c, q, z = (mp.mpf(v) for v in (p.a, p.b, p.c, p.q, p.z))
    k = atom.k
    M = mp.mpf(const_M(p))

    def poch(x, n):
        return mp.qp(x, q, n) if n >= 0 else 1 / mp.qp(x * q**n, q, -n)

    head = M / (mp.qp(q, q) ** 2 * mp.qp(-q / (a * b * z), q) * mp.qp(-q / (a * c * z), q) * mp.qp(-q / (b * c * z), q)
                * mp.qp(-a * a * b * c * z / q, q) * mp.qp(-a * b * b * c * z / q, q) * mp.qp(-a * b * c * c * z / q, q))
    fin = (poch(-q / (a * b * z), k) * poch(-q / (a * c * z), k) * poch(-q / (b * c * z), k)
           / (poch(-1 / (a * a * b * c), k) * poch(-1 / (a * b * b * c), k) * poch(-1 / (a * b * c * c), k)))
    s = a * b * c * z
    return float(head * fin * (q ** (2 * k) - s * s / q**2) * (-q ** ((k + 3) / mp.mpf(2)) / (a * b * c * s)) ** k)


class TestMasses:
    @pytest.mark.parametrize("p", [P0, P2] + DRAWS)
    def test_closed_vs_residue(self, p):
        for t in discrete_set_S(p)[:8]:
            val, imag = mass_residue(t, p)
            assert rel(mass_closed_form(t, p), val) < 1e-7
            assert imag < 1e-8 * abs(val)

    @pytest.mark.parametrize("p", [P2, Parameters(0.5, 1.6, 0.3, 0.4, 1.0)])
    def test_closed_vs_mp_residue(self, p):
        K = _mp_K(p)

        def integrand(g):
            return -1 / (g * _mp_c(g, p) * _mp_c(1 / g, p)) / K

        for t in discrete_set_S(p)[:3]:
            res = _mp_contour(integrand, mp.mpf(t.gamma), mp.mpf(1e-4) * abs(t.gamma), nodes=32)
            assert rel(mass_closed_form(t, p), complex(res)) < 1e-7

    @pytest.mark.parametrize("p", [P0, P2, Parameters(0.5, 1.6, 0.3, 0.4, 1.0)] + DRAWS)
    def test_positive(self, p):
        assert all(t.mass > 0 for t in discrete_set_S(p))

    def test_log_mass_below_underflow(self):
        S = discrete_set_S(P2, mass_floor=1e-300, depth=40)
        deep = [t for t in S if t.mass == 0.0]
        assert all(math.isfinite(t.log_mass) and t.log_mass < -700 for t in deep)
        t = S[0]
        assert mass_log(t, P2) == pytest.approx(math.log(t.mass), rel=1e-13)

    @pytest.mark.parametrize("route", ["closed", "residue"])
    def test_routes(self, route):
        t = discrete_set_S(P2)[1]
        assert rel(discrete_mass(t, P2, route=route), t.mass) < 1e-7

    def test_unknown_route(self):
        with pytest.raises(ValueError):
            discrete_mass(discrete_set_S(P2)[0], P2, route="x")

    @pytest.mark.parametrize("p", [P0, P2] + DRAWS)
    @pytest.mark.parametrize("g", [0.35 + 0.5j, 0.8 * cmath.exp(2.2j), cmath.exp(0.7j)])
    def test_relplanch(self, p, g):
        assert relplanch_residual(g, p) < 1e-10

    @pytest.mark.parametrize("p", [P2] + DRAWS[:2])
    def test_printed_neg_display_only_holds_at_k0(self, p):
        # the printed Neg-family display agrees with the residue at k = 0 and not elsewhere
        atoms = {t.k: t for t in discrete_set_S(p)}
        assert rel(_printed_neg_mass(atoms[0], p), mass_residue(atoms[0], p)[0]) < 1e-10
        for k in (-2, -1, 1):
            if k in atoms:
                assert rel(_printed_neg_mass(atoms[k], p), mass_residue(atoms[k], p)[0]) > 1e-3

    def test_atom_type(self):
        d = DiscreteAtom(-0.3, "neg", 0).as_dict()
        assert d["family"] == "neg" and d["gamma"] == -0.3


class TestDensity:
    @pytest.mark.parametrize("p", [P0, P2] + DRAWS)
    def test_nonnegative(self, p):
        th = (np.arange(512) + 0.5) * math.pi / 512
        assert np.all(continuous_density(th, p) >= 0)

    @pytest.mark.parametrize("p", [P0, P2])
    @pytest.mark.parametrize("th", [0.1, 1.0, 2.5])
    def test_vs_mpmath(self, p, th):
        g = mp.expj(th)
        expect = 1 / (2 * mp.pi * _mp_K(p) * abs(_mp_c(g, p)) ** 2)
        assert rel(continuous_density(th, p), complex(expect)) < 1e-11

    @pytest.mark.parametrize("th", [0.2, 1.7])
    def test_conjugation(self, th):
        g = mp.expj(th)
        assert rel(_mp_c(1 / g, P2), mp.conj(_mp_c(g, P2))) < 1e-14
        assert continuous_density(th, P2) == pytest.approx(continuous_density(-th, P2), rel=1e-13)

    def test_scalar_and_array(self):
        th = np.array([0.3, 0.9])
        arr = continuous_density(th, P2)
        assert arr.shape == (2,)
        assert continuous_density(0.3, P2) == pytest.approx(arr[0], rel=1e-15)


class TestMeasure:
    def test_midpoint_rule_without_near_atoms(self):
        m = spectral_measure(P2, n_theta=64)
        assert m.size == 64
        assert np.allclose(np.diff(m.theta), math.pi / 64)
        assert np.all(m.weights >= 0)

    def test_graded_rule_near_circle(self):
        p = Parameters(0.5, 0.4, 0.5, 0.6, 1.0)
        # move the top Neg atom to within 0.02 of the circle
        s_target = 0.98 * p.q ** 3
        z = s_target / (p.a * p.b * p.c)
        pp = Parameters(p.q, p.a, p.b, p.c, z)
        m = SpectralMeasure(pp, n_theta=96)
        assert min(abs(1 - abs(t.gamma)) for t in m.atoms) < SpectralMeasure.GRADE_BELOW
        assert m.size != 96
        # graded nodes cluster at theta = pi (negative atom)
        assert math.pi - m.theta.max() < 1e-3

    def test_total_mass_spike_identity(self):
        m = spectral_measure(P2, n_theta=512)
        from bigqjacobi.transform import phi_on_measure
        from bigqjacobi.lattice import jackson_weight
        win = LatticeWindow(10, -4, 6)
        xs = win.x(P2)[[0, 5, 11, 15]]
        cont, disc = phi_on_measure(xs, m)
        diag = (np.abs(cont) ** 2).T @ m.weights + np.sum(np.abs(disc) ** 2, axis=0)
        assert np.max(np.abs(diag * jackson_weight(xs, P2) - 1)) < 1e-8

    def test_integrate_constant(self):
        m = spectral_measure(P2, n_theta=256)
        one = m.integrate(lambda th: np.ones_like(th), lambda g: np.ones_like(g))
        assert one.real == pytest.approx(np.sum(m.weights) + np.sum(m.atom_masses), rel=1e-14)

    def test_refined_doubles(self):
        m = spectral_measure(P2, n_theta=128)
        assert m.refined().n_theta == 256
        assert m.refined().atoms is m.atoms

    def test_json(self):
        import json
        d = json.loads(spectral_measure(P2, n_theta=64).to_json(n_samples=8))
        assert set(d) == {"K", "M", "atoms", "density_samples"}
        assert len(d["density_samples"]) == 8
        # deep atoms underflow in mass but keep a finite log mass
        assert all(a["mass"] > 0 or math.isfinite(a["log_mass"]) for a in d["atoms"])


def _spike(win, i):
    s = np.zeros(len(win), dtype=complex)
    s[i] = 1.0
    return LatticeFunction(win, s)


class TestGreen:
    GAMMAS = [0.5 + 0.3j, 0.8 * cmath.exp(2.0j), 0.3 * cmath.exp(-0.9j)]

    @pytest.mark.parametrize("p", [P2] + DRAWS[:2])
    @pytest.mark.parametrize("g", GAMMAS)
    def test_resolvent_identity(self, p, g, rng):
        win = LatticeWindow(30, -15, 30)
        s = np.zeros(len(win), dtype=complex)
        idx = rng.choice(np.arange(5, len(win) - 5), 6, replace=False)
        s[idx] = rng.normal(size=6) + 1j * rng.normal(size=6)
        f = LatticeFunction(win, s)
        G = green_apply(f, g, p)
        LG = apply_L(G, p)
        _, _, i, x, up, down = _stencil(G, p)
        m = mu(g, p)
        gi, fi = G.samples[i], f.samples[i]
        inner = down >= 0
        fdown = np.where(inner, np.abs(G.samples[np.where(inner, down, 0)]) + np.abs(gi), 0.0)
        scale = (np.abs(coeff_A(x, p)) * (np.abs(G.samples[up]) + np.abs(gi)) + np.abs(coeff_B(x, p)) * fdown
                 + np.abs(m * gi) + np.abs(fi))
        assert np.max(np.abs(LG.samples - m * gi - fi) / scale) < 1e-8

    @pytest.mark.parametrize("g", GAMMAS)
    def test_kernel_symmetric(self, g):
        Kx = green_kernel(g, LatticeWindow(6, -3, 5), P2)
        assert np.allclose(Kx, Kx.T, rtol=0, atol=0)

    def test_spike_structure(self):
        g = 0.5 + 0.3j
        win = LatticeWindow(12, -6, 10)
        j = win.n_neg + 3
        G = green_apply(_spike(win, j), g, P2).samples
        f = phi_lattice(g, win, P2).samples
        F = phi_asym_lattice(g, win, P2).samples
        left, right = G[: j + 1] / f[: j + 1], G[j:] / F[j:]
        assert np.max(np.abs(left / left[0] - 1)) < 1e-9
        assert np.max(np.abs(right / right[0] - 1)) < 1e-9

    def test_kernel_matches_apply(self):
        g = 0.8 * cmath.exp(2.0j)
        win = LatticeWindow(8, -4, 6)
        from bigqjacobi.lattice import jackson_weight
        Kx = green_kernel(g, win, P2)
        j = 5
        G = green_apply(_spike(win, j), g, P2).samples
        assert np.allclose(G, Kx[:, j] * jackson_weight(win.x(P2)[j], P2), rtol=1e-12, atol=0)

    def test_list_input(self):
        win = LatticeWindow(8, -4, 6)
        fs = [_spike(win, 2), _spike(win, 9)]
        out = green_apply(fs, 0.5 + 0.3j, P2)
        assert isinstance(out, list) and len(out) == 2
        assert np.allclose(out[1].samples, green_apply(fs[1], 0.5 + 0.3j, P2).samples)

    @pytest.mark.parametrize("g", [0.5, 1.2 + 0.1j, cmath.exp(0.5j)])
    def test_bad_gamma(self, g):
        with pytest.raises(DomainError):
            green_apply(_spike(LatticeWindow(4, -2, 3), 1), g, P2)

    def test_windows_must_match(self):
        with pytest.raises(DomainError):
            green_apply([_spike(LatticeWindow(4, -2, 3), 1), _spike(LatticeWindow(5, -2, 3), 1)], 0.5 + 0.3j, P2)


class TestStone:
    @pytest.fixture(scope="class")
    @staticmethod
    def setup():
        p = P2
        win = LatticeWindow(6, -3, 6)
        rng = np.random.default_rng(5)
        f = LatticeFunction(win, rng.normal(size=len(win)) + 0j)
        g = LatticeFunction(win, rng.normal(size=len(win)) + 0j)
        return p, f, g, spectral_measure(p, n_theta=256)

    def test_sub_band(self, setup):
        p, f, g, m = setup
        lo, hi = band(p)
        w = hi - lo
        lhs, rhs, scale = stone_projection_check(f, g, lo + 0.2 * w, hi - 0.2 * w, p, measure=m)
        assert abs(lhs - rhs) < 1e-4 * scale

    def test_isolated_atom(self, setup):
        p, f, g, m = setup
        eig = [t.eigenvalue(p) for t in m.atoms[:6]]

        def clearance(e):
            return min([abs(e - o) for o in eig if o != e] + [abs(e - b) for b in band(p)])

        e = max(eig, key=clearance)
        d = clearance(e)
        assert d > 0.1
        lhs, rhs, scale = stone_projection_check(f, g, e - d / 2, e + d / 2, p, measure=m)
        assert abs(rhs) > 1e-3 * scale
        assert abs(lhs - rhs) < 1e-4 * scale

    def test_gap(self, setup):
        p, f, g, m = setup
        lo, hi = band(p)
        eig = sorted(t.eigenvalue(p) for t in m.atoms)
        above = [e for e in eig if e > hi]
        top = min(above) if above else hi + 1.0
        lhs, rhs, scale = stone_projection_check(f, g, hi + 0.2 * (top - hi), hi + 0.8 * (top - hi), p, measure=m)
        assert rhs == 0
        assert abs(lhs) < 1e-5 * scale

    def test_band_edge_rejected(self, setup):
        p, f, g, m = setup
        lo, hi = band(p)
        with pytest.raises(DomainError):
            stone_projection_check(f, g, lo - 0.1, lo + 0.1, p, measure=m)
        with pytest.raises(DomainError):
            stone_projection_check(f, g, hi, lo, p, measure=m)
