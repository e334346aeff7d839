"""The q-lattice [-1, inf(z))_q, the operator L, weights and inner products.

Lattice functions are stored as complex sample arrays over a finite window.
Points are kept in increasing order of x: the Neg branch -q^k for
k = 0..k_max_neg, followed by the Pos branch z q^k for k = k_max_pos down to
k_min_pos.
"""

from dataclasses import dataclass, field, replace
import csv
import io
import math

import numpy as np

from .qseries import (ConvergenceError, DomainError, SeriesResult, check_base, is_q_power,
                      _poch_scaled, qpoch_inf_ratio, theta_ratio)

__all__ = [
    "NEG", "POS", "Parameters", "LatticePoint", "LatticeWindow", "LatticeFunction",
    "coeff_A", "coeff_B", "weight_p", "weight_r", "jackson_weight", "log_jackson_weight", "const_K",
    "apply_L", "apply_L_selfadjoint_form", "dq", "jackson_integral", "inner_product",
    "inner_product_truncated", "wronskian", "wronskian_dq_form", "P0", "random_parameters",
]

NEG = "neg"
POS = "pos"

# neighbour codes in the index tables
ENDPOINT = -1
OUTSIDE = -2


@dataclass(frozen=True)
class Parameters:
    """Parameters (q, a, b, c, z) of the operator.

    Construction only checks the base; the domain tests ``check_V``,
    ``check_Vgen`` and ``check_polynomial`` name the violated condition.
    """

    q: float
    a: float
    b: float
    c: float
    z: float = 1.0

    def __post_init__(self):
        check_base(self.q)
        for name in ("a", "b", "c", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")

    def violations_V(self):
        out = []
        for name in ("a", "b", "c", "z"):
            if not getattr(self, name) > 0:
                out.append(f"{name} > 0")
        a, b, c = self.a, self.b, self.c
        for label, v in (("ab", a * b), ("ac", a * c), ("bc", b * c)):
            if not v < 1:
                out.append(f"{label} < 1")
        return out

    def in_V(self):
        return not self.violations_V()

    def check_V(self):
        bad = self.violations_V()
        if bad:
            raise DomainError("parameters violate " + ", ".join(bad))
        return self

    def violations_Vgen(self, tol=1e-9):
        out = self.violations_V()
        if out:
            return out
        a, b, c, z, q = self.a, self.b, self.c, self.z, self.q
        checks = (("a^2", a * a), ("b^2", b * b), ("c^2", c * c), ("ab", a * b), ("ac", a * c),
                  ("bc", b * c), ("a/b", a / b), ("a/c", a / c), ("a^2b^2c^2z^2", (a * b * c * z) ** 2))
        for label, v in checks:
            if is_q_power(v, q, tol) is not None:
                out.append(f"{label} not an integer power of q")
        return out

    def in_Vgen(self, tol=1e-9):
        return not self.violations_Vgen(tol)

    def check_Vgen(self, tol=1e-9):
        bad = self.violations_Vgen(tol)
        if bad:
            raise DomainError("parameters violate " + ", ".join(bad))
        return self

    def violations_polynomial(self):
        a, b, c, q = self.a, self.b, self.c, self.q
        out = []
        for label, v in (("ab", a * b), ("qa/b", q * a / b), ("ac", a * c), ("qa/c", q * a / c)):
            if not v < 1:
                out.append(f"{label} < 1")
        if not b * c < 0:
            out.append("bc < 0")
        return out

    def check_polynomial(self):
        bad = self.violations_polynomial()
        if bad:
            raise DomainError("parameters violate " + ", ".join(bad))
        return self

    def swapped(self):
        """(a, q/b, q/c; bcz/q): the parameters exchanging phi and psi."""
        q = self.q
        return Parameters(q, self.a, q / self.b, q / self.c, self.b * self.c * self.z / q)

    def with_(self, **kw):
        return replace(self, **kw)

    def as_dict(self):
        return {"q": self.q, "a": self.a, "b": self.b, "c": self.c, "z": self.z}


P0 = Parameters(0.5, 0.4, 0.5, 0.6, 1.0)


def random_parameters(rng, n, margin=1e-3):
    """``n`` draws from V_z^gen with a <= 0.9 so the default window tails stay small.

    Draws within ``margin`` (log-q units) of an excluded q-power are rejected,
    which keeps every series route well away from its singular denominators.
    """
    out = []
    while len(out) < n:
        q = rng.uniform(0.3, 0.7)
        a, b, c = rng.uniform(0.2, 0.9, size=3)
        z = float(np.exp(rng.uniform(-0.7, 0.7)))
        if max(a * b, a * c, b * c) > 0.85:
            continue
        p = Parameters(float(q), float(a), float(b), float(c), z)
        if p.in_Vgen(tol=margin):
            out.append(p)
    return out


@dataclass(frozen=True)
class LatticePoint:
    branch: str
    k: int

    def __post_init__(self):
        if self.branch not in (NEG, POS):
            raise DomainError(f"unknown branch {self.branch!r}")
        if self.branch == NEG and self.k < 0:
            raise DomainError("Neg-branch points need k >= 0")

    def value(self, p):
        return -p.q ** self.k if self.branch == NEG else p.z * p.q ** self.k

    @classmethod
    def parse(cls, text):
        """Parse ``neg:k`` or ``pos:k``."""
        try:
            br, k = text.split(":")
            return cls(br.strip().lower(), int(k))
        except ValueError as exc:
            raise DomainError(f"bad lattice point {text!r}; expected neg:k or pos:k") from exc


@dataclass(frozen=True)
class LatticeWindow:
    """Finite window of the lattice: Neg indices 0..k_max_neg, Pos indices k_min_pos..k_max_pos."""

    k_max_neg: int = 80
    k_min_pos: int = -60
    k_max_pos: int = 80

    def __post_init__(self):
        if self.k_max_neg < 0 or self.k_min_pos > self.k_max_pos:
            raise DomainError("lattice window must be nonempty on both branches")

    @property
    def n_neg(self):
        return self.k_max_neg + 1

    @property
    def n_pos(self):
        return self.k_max_pos - self.k_min_pos + 1

    def __len__(self):
        return self.n_neg + self.n_pos

    def branches(self):
        return np.array([NEG] * self.n_neg + [POS] * self.n_pos)

    def ks(self):
        return np.concatenate([np.arange(self.n_neg), np.arange(self.k_max_pos, self.k_min_pos - 1, -1)])

    def points(self):
        return [LatticePoint(b, int(k)) for b, k in zip(self.branches(), self.ks())]

    def x(self, p):
        q = p.q
        neg = -q ** np.arange(self.n_neg, dtype=float)
        pos = p.z * q ** np.arange(self.k_max_pos, self.k_min_pos - 1, -1, dtype=float)
        return np.concatenate([neg, pos])

    def index(self, pt):
        if pt.branch == NEG:
            if 0 <= pt.k <= self.k_max_neg:
                return pt.k
        elif self.k_min_pos <= pt.k <= self.k_max_pos:
            return self.n_neg + (self.k_max_pos - pt.k)
        raise DomainError(f"point {pt} is outside the window")

    def contains(self, pt):
        try:
            self.index(pt)
            return True
        except DomainError:
            return False

    def neighbours(self):
        """Index arrays of qx and x/q; ENDPOINT marks x = -1, OUTSIDE a missing point."""
        n = len(self)
        up = np.full(n, OUTSIDE)     # index of q x
        down = np.full(n, OUTSIDE)   # index of x / q
        nn = self.n_neg
        for k in range(nn):
            up[k] = k + 1 if k + 1 < nn else OUTSIDE
            down[k] = k - 1 if k > 0 else ENDPOINT
        for i in range(self.n_pos):
            j = nn + i
            up[j] = j - 1 if i > 0 else OUTSIDE
            down[j] = j + 1 if i + 1 < self.n_pos else OUTSIDE
        return up, down

    def shrink(self):
        return LatticeWindow(self.k_max_neg - 1, self.k_min_pos + 1, self.k_max_pos - 1)

    def restrict_indices(self, sub):
        """Indices in this window of the points of the sub-window ``sub``."""
        return np.array([self.index(pt) for pt in sub.points()])


@dataclass
class LatticeFunction:
    """Complex samples of a function on a lattice window."""

    window: LatticeWindow
    samples: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.samples is None:
            self.samples = np.zeros(len(self.window), dtype=complex)
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != (len(self.window),):
            raise DomainError("one sample per window point is required")

    @classmethod
    def from_callable(cls, window, p, fn):
        return cls(window, np.asarray(fn(window.x(p)), dtype=complex))

    @classmethod
    def spike(cls, window, pt, value=1.0):
        f = cls(window)
        f.samples[window.index(pt)] = value
        return f

    def __call__(self, pt):
        return self.samples[self.window.index(pt)]

    def restrict(self, sub):
        return LatticeFunction(sub, self.samples[self.window.restrict_indices(sub)])

    def conj(self):
        return LatticeFunction(self.window, np.conj(self.samples))

    def __add__(self, other):
        return LatticeFunction(self.window, self.samples + other.samples)

    def __sub__(self, other):
        return LatticeFunction(self.window, self.samples - other.samples)

    def __mul__(self, s):
        if isinstance(s, LatticeFunction):
            return LatticeFunction(self.window, self.samples * s.samples)
        return LatticeFunction(self.window, self.samples * s)

    __rmul__ = __mul__

    def to_csv(self, p, path=None):
        """Write columns branch,k,x,re,im with 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["branch", "k", "x", "re", "im"])
        for br, k, x, v in zip(self.window.branches(), self.window.ks(), self.window.x(p), self.samples):
            w.writerow([br, int(k), f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        neg = sorted(int(r["k"]) for r in rows if r["branch"] == NEG)
        pos = sorted(int(r["k"]) for r in rows if r["branch"] == POS)
        if not neg or not pos or neg != list(range(len(neg))) or pos != list(range(pos[0], pos[-1] + 1)):
            raise DomainError("CSV does not describe a contiguous lattice window")
        win = LatticeWindow(neg[-1], pos[0], pos[-1])
        f = cls(win)
        for r in rows:
            f.samples[win.index(LatticePoint(r["branch"], int(r["k"])))] = complex(float(r["re"]), float(r["im"]))
        return f


# --- coefficient and weight functions -------------------------------------------------------

def _nonzero(x):
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise DomainError("x = 0 is not a lattice point")
    return x


def coeff_A(x, p):
    x = _nonzero(x)
    a, b, c = p.a, p.b, p.c
    return a * a * (1 + 1 / (a * b * x)) * (1 + 1 / (a * c * x))


def coeff_B(x, p):
    x = _nonzero(x)
    return (1 + p.q / (p.b * p.c * x)) * (1 + 1 / x)


def _real(v):
    v = np.asarray(v)
    return v.real[()] if v.ndim == 0 else v.real


def weight_p(x, p):
    """p(x) = (-abx, -acx; q)_inf / (-bcx, -qx; q)_inf."""
    x = np.asarray(x, dtype=float)
    a, b, c, q = p.a, p.b, p.c, p.q
    val = _real(qpoch_inf_ratio([-a * b * x, -a * c * x], [-b * c * x, -q * x], q))
    return SeriesResult(val, np.abs(val) * 1e-15 * 8, 0)


def weight_r(x, p):
    """r(x) = (1-q)^2/(qbc) (-bcx, -qx; q)_inf / (-qabx, -qacx; q)_inf."""
    x = np.asarray(x, dtype=float)
    a, b, c, q = p.a, p.b, p.c, p.q
    val = (1 - q) ** 2 / (q * b * c) * _real(qpoch_inf_ratio([-b * c * x, -q * x], [-q * a * b * x, -q * a * c * x], q))
    return SeriesResult(val, np.abs(val) * 1e-15 * 8, 0)


def jackson_weight(x, p):
    """(1-q)|x|/p(x), the mass of a lattice point in the inner product."""
    x = np.asarray(x, dtype=float)
    return (1 - p.q) * np.abs(x) / weight_p(x, p).value


def log_jackson_weight(x, p):
    """log of :func:`jackson_weight`, valid where the weight leaves the double range."""
    x = np.asarray(x, dtype=float)
    a, b, c, q = p.a, p.b, p.c, p.q
    acc, _ = _poch_scaled([-b * c * x, -q * x], [-a * b * x, -a * c * x], q)
    return np.log((1 - q) * np.abs(x)) + np.log(np.abs(acc.m)) + acc.e * math.log(2.0)


def const_K(p, route="theta"):
    """K = (1-q) z theta(-bcz, -qz) / theta(-abz, -acz)."""
    a, b, c, q, z = p.a, p.b, p.c, p.q, p.z
    if route == "theta":
        ratio = theta_ratio([-b * c * z, -q * z], [-a * b * z, -a * c * z], q)
    elif route == "product":
        num = [-b * c * z, -q / (b * c * z), -q * z, -1 / z]
        den = [-a * b * z, -q / (a * b * z), -a * c * z, -q / (a * c * z)]
        ratio = qpoch_inf_ratio(num, den, q)
    else:
        raise DomainError(f"unknown route {route!r}")
    return float(np.real((1 - q) * z * ratio))


# --- the operator ----------------------------------------------------------------------------

def _stencil(f, p):
    win = f.window
    up, down = win.neighbours()
    x = win.x(p)
    inner = win.shrink()
    idx = win.restrict_indices(inner)
    if np.any(up[idx] < 0) or np.any(down[idx] == OUTSIDE):
        raise DomainError("window too small for the q-difference stencil")
    return win, inner, idx, x[idx], up[idx], down[idx]


def apply_L(f, p):
    """(Lf)(x) = A(x)(f(qx) - f(x)) + B(x)(f(x/q) - f(x)); end-point rule at x = -1.

    The result lives on ``f.window.shrink()``: the open ends have no
    neighbour and are dropped instead of extrapolated.
    """
    if len(f.window) < 3 or f.window.k_max_neg < 1 or f.window.n_pos < 3:
        raise DomainError("window too small for apply_L")
    win, inner, idx, x, up, down = _stencil(f, p)
    s = f.samples
    fx = s[idx]
    out = coeff_A(x, p) * (s[up] - fx)
    interior = down >= 0
    out = out + np.where(interior, coeff_B(x, p) * (s[np.where(interior, down, 0)] - fx), 0.0)
    return LatticeFunction(inner, out)


def apply_L_selfadjoint_form(f, p):
    """L through p(x) (D_q(r D_q f))(x/q), and -q p r/((1-q)x) D_q f at x = -1."""
    if len(f.window) < 3 or f.window.k_max_neg < 1 or f.window.n_pos < 3:
        raise DomainError("window too small for apply_L")
    win, inner, idx, x, up, down = _stencil(f, p)
    q = p.q
    s = f.samples
    fx = s[idx]
    dq_x = (fx - s[up]) / ((1 - q) * x)
    rx = weight_r(x, p).value
    px = weight_p(x, p).value
    interior = down >= 0
    xs = x / q
    fxs = s[np.where(interior, down, 0)]
    dq_xs = (fxs - fx) / ((1 - q) * xs)
    rxs = np.where(interior, weight_r(np.where(interior, xs, x), p).value, 0.0)
    inner_val = px * (rxs * dq_xs - rx * dq_x) / ((1 - q) * xs)
    end_val = -q * px * rx / ((1 - q) * x) * dq_x
    return LatticeFunction(inner, np.where(interior, inner_val, end_val))


def dq(f, pt, p):
    """(D_q f)(x) = (f(x) - f(qx)) / ((1-q) x)."""
    x = pt.value(p)
    nxt = LatticePoint(pt.branch, pt.k + 1)
    return (f(pt) - f(nxt)) / ((1 - p.q) * x)


def wronskian(f, g, pt, p):
    """W(f, g)(x) = q r(x)/((1-q) x) (f(x) g(qx) - f(qx) g(x))."""
    x = pt.value(p)
    nxt = LatticePoint(pt.branch, pt.k + 1)
    r = weight_r(x, p).value
    return p.q * r / ((1 - p.q) * x) * (f(pt) * g(nxt) - f(nxt) * g(pt))


def wronskian_dq_form(f, g, pt, p):
    """Second form q r(x)((D_q f)(x) g(x) - f(x)(D_q g)(x))."""
    x = pt.value(p)
    r = weight_r(x, p).value
    return p.q * r * (dq(f, pt, p) * g(pt) - f(pt) * dq(g, pt, p))


# --- integration ------------------------------------------------------------------------------

def _geometric_tail(terms):
    """Tail bound of an outward sequence of term magnitudes by geometric extrapolation."""
    t = np.abs(np.asarray(terms[-5:]))
    if t.size == 0 or t[-1] == 0 and np.all(t == 0):
        return 0.0
    if t.size < 2 or np.any(t[:-1] == 0):
        return float(t[-1]) if t[-1] == 0 else math.inf
    rho = float(np.max(t[1:] / t[:-1]))
    if rho >= 1:
        return math.inf
    return float(t[-1]) * rho / (1 - rho)


def jackson_integral(f, lower, upper, p=None, window=None, n_terms=None):
    """Jackson q-integral of ``f`` from ``lower`` to ``upper``.

    ``f`` is either a callable (vectorised in x) or a LatticeFunction.  The
    limits admitted are 0, finite reals and ``("inf", y)`` for inf(y).  For a
    LatticeFunction the only admitted range is ``-1`` to ``("inf", z)`` on the
    window.  ``n_terms`` caps the one-sided sums of callables.
    """
    if isinstance(f, LatticeFunction):
        if p is None:
            raise DomainError("parameters are needed to integrate a lattice function")
        if lower != -1 or not (isinstance(upper, tuple) and upper[0] == "inf"):
            raise DomainError("lattice functions integrate over [-1, inf(z)) only")
        return _lattice_sum(f.samples, f.window, p)
    q = check_base(p.q if p is not None else window)
    n = n_terms or (math.ceil(math.log(1e-17) / math.log(q)) + 10)

    def from_zero(g):
        if isinstance(g, tuple):
            y = g[1]
            ks = np.arange(-n, n + 1)
            pts = y * q ** ks.astype(float)
            vals = np.asarray(f(pts), dtype=complex) * pts * (1 - q)
            tail = _geometric_tail(vals[:n + 1][::-1]) + _geometric_tail(vals[n:])
            return vals.sum(), tail
        if g == 0:
            return 0.0, 0.0
        pts = g * q ** np.arange(n, dtype=float)
        vals = np.asarray(f(pts), dtype=complex) * pts * (1 - q)
        return vals.sum(), _geometric_tail(vals)

    hi, ehi = from_zero(upper)
    lo, elo = from_zero(lower)
    err = ehi + elo
    if not math.isfinite(err):
        raise ConvergenceError("Jackson integral tail does not decay")
    return SeriesResult(hi - lo, err, 2 * n)


def _lattice_sum(vals, window, p):
    """sum of vals * (1-q)|x|; vals already include 1/p if wanted."""
    x = window.x(p)
    terms = np.asarray(vals) * (1 - p.q) * np.abs(x)
    nn = window.n_neg
    neg = terms[:nn]
    pos = terms[nn:]
    # outward directions: Neg towards 0 (increasing k), Pos towards 0 (its start) and towards inf (its end)
    err = _geometric_tail(neg) + _geometric_tail(pos[::-1]) + _geometric_tail(pos)
    if not math.isfinite(err):
        raise ConvergenceError("lattice sum tail does not decay")
    return SeriesResult(terms.sum(), err, len(terms))


def inner_product(f, g, p):
    """<f, g> = sum f conj(g) (1-q)|x| / p(x) over the window, with a tail estimate."""
    if f.window != g.window:
        raise DomainError("inner product needs a common window")
    x = f.window.x(p)
    vals = f.samples * np.conj(g.samples) / weight_p(x, p).value
    return _lattice_sum(vals, f.window, p)


def inner_product_truncated(f, g, p, k, l, m):
    """<f, g>_{k;l,m}: Neg points n = 0..k and Pos points n = l..m."""
    total = 0j
    for n in range(0, k + 1):
        pt = LatticePoint(NEG, n)
        x = pt.value(p)
        total += f(pt) * np.conj(g(pt)) * (1 - p.q) * abs(x) / weight_p(x, p).value
    for n in range(l, m + 1):
        pt = LatticePoint(POS, n)
        x = pt.value(p)
        total += f(pt) * np.conj(g(pt)) * (1 - p.q) * abs(x) / weight_p(x, p).value
    return complex(total)
