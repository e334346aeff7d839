import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from bigqjacobi.eigen import (
    _route_ancontB, _route_phiB, big_qjacobi_poly, big_qjacobi_prefactor, dq_phi_formula, dq_psi_formula,
    eigen_residual, gamma_from_mu, in_S_pol, in_S_pol_plus, in_S_sing, in_S_sing_plus, mu, phi, phi_asym,
    phi_asym_extended, phi_asym_lattice, phi_asym_pos_values, phi_lattice, phi_minus, phi_minus_prefactor,
    phi_origin, phi_values, psi, psi_lattice, psi_origin,
)
from bigqjacobi.lattice import NEG, POS, LatticeFunction, LatticePoint, LatticeWindow, Parameters, dq, wronskian
from bigqjacobi.qseries import DomainError

from conftest import rel

P0 = Parameters(0.5, 0.4, 0.5, 0.6, 1.0)
P2 = Parameters(0.6, 0.3, 0.7, 0.45, 1.3)
PARAMS = [P0, P2]
GAMMAS = [0.3 + 0.4j, 0.5 * cmath.exp(2.1j), 0.8 * cmath.exp(0.7j), cmath.exp(1.3j), 0.25]


def _qhyper(upper, lower, q, arg, n_max=4000):
    """Direct extended-precision summation; stops on a vanishing term or once terms stall below 1e-35."""
    total, term = mp.mpf(0), mp.mpf(1)
    for k in range(n_max):
        total += term
        num = mp.fprod(1 - u * q ** k for u in upper)
        if num == 0:
            return total
        term *= num * arg / (mp.fprod(1 - v * q ** k for v in lower) * (1 - q ** (k + 1)))
        if abs(term) < mp.mpf(10) ** -35 * abs(total):
            return total + term
    raise RuntimeError("oracle series did not converge")


def _mp_phi(g, x, p):
    """phi_g(x) from its defining 3phi2, for |bcx| < 1."""
    q, a, b, c = (mp.mpf(v) for v in (p.q, p.a, p.b, p.c))
    g, x = mp.mpc(g), mp.mpf(x)
    return complex(_qhyper([a * g, a / g, -1 / x], [a * b, a * c], q, -b * c * x))


def _mp_phi_ancont(g, x, p):
    """phi_g(x) from the continuation valid for |a g| < 1 and every x."""
    q, a, b, c = (mp.mpf(v) for v in (p.q, p.a, p.b, p.c))
    g, x = mp.mpc(g), mp.mpf(x)
    w = -a * b * c * x / g
    pref = mp.qp(a * g, q) * mp.qp(b * c, q) * mp.qp(w, q) / (mp.qp(a * b, q) * mp.qp(a * c, q) * mp.qp(-b * c * x, q))
    return complex(pref * _qhyper([b / g, c / g, -b * c * x], [b * c, w], q, a * g))


def _mp_psi(g, x, p):
    q, a, b, c = (mp.mpf(v) for v in (p.q, p.a, p.b, p.c))
    g, x = mp.mpc(g), mp.mpf(x)
    return complex(_qhyper([a * g, a / g, -q / (b * c * x)], [q * a / b, q * a / c], q, -q * x))


class TestMu:
    @pytest.mark.parametrize("p", PARAMS)
    def test_special_values(self, p):
        assert rel(mu(1, p), -(1 - p.a) ** 2) < 1e-15
        assert rel(mu(-1, p), -(1 + p.a) ** 2) < 1e-15

    def test_inversion_symmetry(self):
        g = 0.3 + 0.4j
        assert rel(mu(g, P0), mu(1 / g, P0)) < 1e-15

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            mu(0, P0)

    @pytest.mark.parametrize("g", GAMMAS)
    def test_gamma_from_mu(self, g):
        g = g if abs(g) <= 1 else 1 / g
        assert abs(gamma_from_mu(mu(g, P0), P0) - g) < 1e-12


class TestClassification:
    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_sing_plus(self, k):
        for s in (1, -1):
            assert in_S_sing_plus(s * P0.q ** (-k / 2), P0)
        assert not in_S_sing_plus(P0.q ** (k / 2), P0)

    @pytest.mark.parametrize("k", [-3, 0, 1, 4])
    def test_sing(self, k):
        assert in_S_sing(P0.q ** (k / 2), P0) and in_S_sing(-P0.q ** (k / 2), P0)

    def test_not_sing(self):
        assert not in_S_sing(0.3 + 0.4j, P0)
        assert not in_S_sing(0.9 * P0.q, P0)

    @pytest.mark.parametrize("n", [0, 1, 3])
    def test_pol(self, n):
        assert in_S_pol_plus(P0.a * P0.q ** n, P0) == (True, n)
        assert in_S_pol(P0.a * P0.q ** n, P0)
        assert in_S_pol(1 / (P0.a * P0.q ** n), P0)

    def test_not_pol(self):
        assert not in_S_pol(P0.a / P0.q, P0)
        assert not in_S_pol(0.33, P0)


class TestPhi:
    @pytest.mark.parametrize("g", GAMMAS)
    def test_normalisation(self, g):
        assert rel(phi(g, LatticePoint(NEG, 0), P0).value, 1.0) < 1e-14

    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", GAMMAS)
    def test_inversion_symmetry(self, p, g):
        x = LatticeWindow(10, -10, 10).x(p)
        u, v = phi_values(g, x, p)[0], phi_values(1 / g, x, p)[0]
        assert np.max(np.abs(u - v) / np.abs(u)) < 1e-11

    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", GAMMAS)
    @pytest.mark.parametrize("x", [-1.0, -0.25, 0.5, 1.0])
    def test_against_defining_series(self, p, g, x):
        if abs(p.b * p.c * x) >= 1:
            pytest.skip("outside the defining disc")
        assert rel(phi(g, x, p).value, _mp_phi(g, x, p)) < 1e-12

    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.8 * cmath.exp(0.7j), cmath.exp(1.3j)])
    @pytest.mark.parametrize("k", [-4, -10, -25])
    def test_large_x_against_continuation(self, p, g, k):
        x = p.z * p.q ** k
        assert rel(phi(g, x, p).value, _mp_phi_ancont(g, x, p)) < 1e-10

    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.6 * cmath.exp(2.5j), cmath.exp(0.4j)])
    @pytest.mark.parametrize("x", [-0.5, 0.25, 1.0])
    def test_route_overlap(self, g, x):
        ga, xa = np.array([complex(g)]), np.array([x])
        ok1, v1, _ = _route_phiB(ga, xa, P0.a, P0.b, P0.c, P0.q)
        ok2, v2, _ = _route_ancontB(ga, xa, P0.a, P0.b, P0.c, P0.q)
        assert ok1[0] and ok2[0]
        assert rel(v1[0], v2[0]) < 1e-10

    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", GAMMAS)
    def test_eigen_equation(self, p, g):
        f = phi_lattice(g, LatticeWindow(40, -25, 40), p)
        assert eigen_residual(f, g, p) < 1e-9


class TestPsi:
    @pytest.mark.parametrize("g", GAMMAS)
    @pytest.mark.parametrize("x", [-1.0, -0.5, 0.25, 0.5])
    def test_against_defining_series(self, g, x):
        assert rel(psi(g, x, P2).value, _mp_psi(g, x, P2)) < 1e-10

    @pytest.mark.parametrize("g", GAMMAS)
    def test_inversion_symmetry(self, g):
        x = np.array([-0.5, 0.3, 2.0])
        assert np.allclose(psi(g, x, P2).value, psi(1 / g, x, P2).value, rtol=1e-11, atol=0)

    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j)])
    def test_eigen_equation_off_endpoint(self, g):
        f = psi_lattice(g, LatticeWindow(40, -25, 40), P2)
        assert eigen_residual(f, g, P2, include_endpoint=False) < 1e-9

    def test_fails_at_endpoint(self):
        g = 0.3 + 0.4j
        f = psi_lattice(g, LatticeWindow(40, -25, 40), P2)
        assert eigen_residual(f, g, P2, include_endpoint=True) > 1e-3


class TestDerivatives:
    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j)])
    @pytest.mark.parametrize("pt", [LatticePoint(NEG, 0), LatticePoint(NEG, 6), LatticePoint(POS, 2), LatticePoint(POS, -5)])
    def test_dq_against_lattice(self, p, g, pt):
        win = LatticeWindow(12, -8, 12)
        f, h = phi_lattice(g, win, p), psi_lattice(g, win, p)
        assert rel(dq_phi_formula(g, pt, p), dq(f, pt, p)) < 1e-9
        assert rel(dq_psi_formula(g, pt, p), dq(h, pt, p)) < 1e-9

    def test_vanishes_with_mu(self):
        # mu(a) = 0
        assert abs(dq_phi_formula(P0.a, 0.5, P0)) < 1e-15

    @pytest.mark.parametrize("g", GAMMAS)
    def test_value_at_minus_one(self, g):
        a, b, c, q = P0.a, P0.b, P0.c, P0.q
        expect = b * c * mu(g, P0) / ((1 - q) * (1 - a * b) * (1 - a * c))
        assert rel(dq_phi_formula(g, -1.0, P0), expect) < 1e-13


class TestOrigin:
    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j), 0.25])
    def test_two_sided_limit(self, p, g):
        v0, d0 = phi_origin(g, p)
        for k in range(30, 46):
            for x in (-p.q ** k, p.z * p.q ** k):
                # first-order expansion; the quadratic term is below 1e-12 here
                assert abs(phi(g, x, p).value - v0 - d0 * x) < 1e-8

    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j)])
    def test_derivative(self, p, g):
        _, d0 = phi_origin(g, p)
        # deep points: the analytic D_q, free of the eps/|x| loss of a difference quotient
        for x in (-p.q ** 35, p.z * p.q ** 35):
            assert abs(dq_phi_formula(g, x, p) - d0) < 1e-7
        win = LatticeWindow(20, 10, 20)
        f = phi_lattice(g, win, p)
        for br in (NEG, POS):
            pt = LatticePoint(br, 15)
            assert abs(dq(f, pt, p) - d0) < 1e-12 / abs(pt.value(p)) + 10 * abs(pt.value(p)) * abs(d0)

    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j)])
    def test_psi_limit(self, g):
        v0, d0 = psi_origin(g, P2)
        for k in (35, 40):
            for x in (-P2.q ** k, P2.z * P2.q ** k):
                assert abs(psi(g, x, P2).value - v0 - d0 * x) < 1e-8
                assert abs(dq_psi_formula(g, x, P2) - d0) < 1e-7


class TestPhiAsym:
    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.8 * cmath.exp(0.7j), cmath.exp(1.3j)])
    def test_leading_behaviour(self, p, g):
        m = 40
        v = phi_asym(g, LatticePoint(POS, -m), p).value
        assert abs(v / (p.a * g) ** m - 1) < 1e-6

    @pytest.mark.parametrize("p", PARAMS)
    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j)])
    def test_eigen_equation(self, p, g):
        F = phi_asym_lattice(g, LatticeWindow(30, -30, 30), p)
        assert eigen_residual(F, g, p, pos_only=True) < 1e-9

    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.5 * cmath.exp(2.0j), 0.9])
    def test_routes_agree(self, g):
        ks = np.arange(-12, 3)
        u, _ = phi_asym_pos_values(g, ks, P2)
        v, _ = phi_asym_pos_values(g, ks, P2, route="B")
        assert np.max(np.abs(u - v) / np.abs(v)) < 1e-10

    def test_singular_rejected(self):
        with pytest.raises(DomainError):
            phi_asym(1 / math.sqrt(P0.q), LatticePoint(POS, 0), P0)


class TestPhiExtended:
    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.8 * cmath.exp(0.7j), cmath.exp(1.3j)])
    def test_matches_pos_branch(self, g):
        ks = np.arange(-8, 6)
        xs = P2.z * P2.q ** ks.astype(float)
        ext = phi_asym_extended(g, xs, P2)
        pos, _ = phi_asym_pos_values(g, ks, P2)
        assert np.max(np.abs(ext - pos) / np.abs(pos)) < 1e-8

    @pytest.mark.parametrize("n", [0, 1])
    def test_continuity_in_gamma(self, n):
        gn = P2.a * P2.q ** n
        x = np.array([-1.0, -0.3 * 0 - P2.q ** 3])
        centre = phi_asym_extended(gn, x, P2)
        lo = phi_asym_extended(gn - 1e-4, x, P2)
        hi = phi_asym_extended(gn + 1e-4, x, P2)
        assert np.max(np.abs((lo + hi) / 2 - centre)) < 1e-5
        assert np.max(np.abs(lo - centre)) < 1e-2

    @pytest.mark.parametrize("g", [0.3 + 0.4j, cmath.exp(1.3j)])
    def test_two_sided_origin(self, g):
        q, k = P2.q, 20

        def d_at_zero(y):
            # D_q at y and qy, linearly extrapolated to 0; the O(y^2) remainder is ~1e-9
            x = y * q ** np.arange(k, k + 3)
            v = phi_asym_extended(g, x, P2)
            d = (v[:-1] - v[1:]) / ((1 - q) * x[:-1])
            d0 = (d[1] - q * d[0]) / (1 - q)
            return d0, v[-1] - d0 * x[-1]

        dn, vn = d_at_zero(-1.0)
        dp, vp = d_at_zero(P2.z)
        assert abs(vn - vp) < 1e-7 * max(1.0, abs(vn))
        assert abs(dn - dp) < 1e-7 * max(1.0, abs(dn))


class TestPhiMinus:
    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.8 * cmath.exp(0.7j), 0.6])
    def test_value_at_minus_one(self, g):
        assert rel(phi_minus(g, LatticePoint(NEG, 0), P2).value, phi_minus_prefactor(g, P2)) < 1e-9

    @pytest.mark.parametrize("g", [0.3 + 0.4j, 0.8 * cmath.exp(0.7j)])
    @pytest.mark.parametrize("k", [3, 10])
    def test_proportional_to_phi(self, g, k):
        pt = LatticePoint(NEG, k)
        assert rel(phi_minus(g, pt, P2).value, phi_minus_prefactor(g, P2) * phi(g, pt, P2).value) < 1e-9

    def test_wronskian_vanishes(self):
        g = 0.3 + 0.4j
        win = LatticeWindow(12, 0, 2)
        f = phi_lattice(g, win, P2)
        h = LatticeFunction(win, np.concatenate([
            [phi_minus(g, LatticePoint(NEG, k), P2).value for k in range(13)], np.zeros(3)]))
        for k in range(12):
            pt = LatticePoint(NEG, k)
            scale = abs(wronskian(f, f.conj(), pt, P2)) + abs(h(pt) * f(pt)) + 1
            assert abs(wronskian(f, h, pt, P2)) < 1e-9 * scale

    def test_pos_rejected(self):
        with pytest.raises(DomainError):
            phi_minus(0.3, LatticePoint(POS, 0), P2)


class TestBigQJacobi:
    @pytest.mark.parametrize("x", [-1.0, 0.3, 2 + 1j])
    def test_degree_zero(self, x):
        assert big_qjacobi_poly(0, x, P0) == 1

    @pytest.mark.parametrize("n", range(7))
    def test_routes_agree(self, n):
        x = LatticeWindow(6, -3, 6).x(P0)
        u = big_qjacobi_poly(n, x, P0, route="jacobi")
        v = big_qjacobi_poly(n, x, P0, route="phi")
        assert np.max(np.abs(u - v)) / np.max(np.abs(v)) < 1e-10

    @pytest.mark.parametrize("n", range(5))
    def test_matches_phi(self, n):
        gn = P2.a * P2.q ** n
        x = LatticeWindow(6, -3, 6).x(P2)
        u = big_qjacobi_poly(n, x, P2)
        v = phi_values(gn, x, P2)[0]
        assert np.max(np.abs(u - v)) / np.max(np.abs(v)) < 1e-10

    @pytest.mark.parametrize("n", range(5))
    def test_proportional_to_psi(self, n):
        gn = P2.a * P2.q ** n
        x = LatticeWindow(6, -3, 6).x(P2)
        u = big_qjacobi_poly(n, x, P2)
        v = big_qjacobi_prefactor(n, P2) * psi(gn, x, P2).value
        assert np.max(np.abs(u - v)) / np.max(np.abs(u)) < 1e-10

    def test_negative_degree(self):
        with pytest.raises(DomainError):
            big_qjacobi_poly(-1, 0.5, P0)
