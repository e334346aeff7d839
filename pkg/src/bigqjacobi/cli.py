"""Command-line entry point: ``bigqjacobi {eval,verify,table}``.

Output columns
--------------
verify
    suite, identity, params, residual, tol, pass
table atoms
    family, e, k, gamma, eigenvalue, mass, log_mass
table hahn-gram
    row, then one column per basis function (p0.., r-10..r10)
table bigq-norms
    n, closed, lattice, rel_diff
table density
    theta, density
eval
    what, point, value_re, value_im, err_estimate

Exit codes: 0 pass, 1 usage, 2 domain error, 3 convergence failure,
4 a verified residual above its tolerance.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .lattice import P0, LatticePoint, LatticeWindow
from .qseries import ConvergenceError, DomainError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_CONVERGENCE, EXIT_TOLERANCE = 0, 1, 2, 3, 4

EVAL_TARGETS = ("phi", "psi", "Phi", "c", "K", "measure-atom", "density")
TABLES = ("atoms", "hahn-gram", "bigq-norms", "density")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_complex(text):
    """``re,im`` or polar ``r@angle``."""
    try:
        if "@" in text:
            r, t = (float(v) for v in text.split("@"))
            return complex(r * math.cos(t), r * math.sin(t))
        parts = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad complex number {text!r}; use re,im or r@angle") from exc
    if len(parts) == 1:
        return complex(parts[0])
    if len(parts) != 2:
        raise UsageError(f"bad complex number {text!r}; use re,im or r@angle")
    return complex(parts[0], parts[1])


def build_parser():
    ap = _Parser(prog="bigqjacobi", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        for name in ("q", "a", "b", "c", "z"):
            sp.add_argument(f"--{name}", type=float, default=None)
        sp.add_argument("--tol", type=float, default=None, help="override every tolerance")
        sp.add_argument("--kmax-neg", type=int, default=None)
        sp.add_argument("--kmin-pos", type=int, default=None)
        sp.add_argument("--kmax-pos", type=int, default=None)
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    ev = sub.add_parser("eval", help="evaluate one quantity")
    ev.add_argument("what", choices=EVAL_TARGETS)
    ev.add_argument("--gamma", default=None, help="re,im or r@angle")
    ev.add_argument("--theta", type=float, default=None)
    ev.add_argument("--x", default=None, help="lattice point neg:k or pos:k (default: the whole window)")
    common(ev)

    from .suites import SUITES
    ve = sub.add_parser("verify", help="run an identity suite")
    ve.add_argument("suite", choices=tuple(SUITES) + ("all",))
    ve.add_argument("--seed", type=int, default=0)
    common(ve)

    ta = sub.add_parser("table", help="emit a table")
    ta.add_argument("table", choices=TABLES)
    ta.add_argument("--n", type=int, default=None)
    common(ta)
    return ap


def _params(args, polynomial=False):
    given = {k: getattr(args, k) for k in ("q", "a", "b", "c", "z") if getattr(args, k) is not None}
    if polynomial:
        from .suites import polynomial_defaults
        base = polynomial_defaults()
    else:
        base = P0
    p = base.with_(**given) if given else base
    if polynomial:
        p.check_polynomial()
        return p
    p.check_V()
    # the default P0 has b^2 = q^2, so genericity is reported, not enforced
    loose = p.violations_Vgen()
    if loose:
        print("note: non-generic parameters (" + ", ".join(loose) + ")", file=sys.stderr)
    return p


def _window(args):
    d = LatticeWindow()
    return LatticeWindow(d.k_max_neg if args.kmax_neg is None else args.kmax_neg,
                         d.k_min_pos if args.kmin_pos is None else args.kmin_pos,
                         d.k_max_pos if args.kmax_pos is None else args.kmax_pos)


def _fmt(v):
    if isinstance(v, bool):
        return "pass" if v else "fail"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit(rows, header, args, out):
    if args.format == "json":
        text = json.dumps([dict(zip(header, r)) for r in rows], indent=2, sort_keys=False) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _gamma(args):
    if args.gamma is None:
        raise UsageError("--gamma is required")
    return parse_complex(args.gamma)


def cmd_eval(args, out):
    from . import eigen, spectral
    from .cfun import K_coefficients, c_function
    what = args.what
    header = ["what", "point", "value_re", "value_im", "err_estimate"]
    if what == "density":
        p = _params(args)
        if args.theta is None:
            raise UsageError("--theta is required")
        v = float(spectral.continuous_density(args.theta, p))
        _emit([[what, f"theta={args.theta!r}", v, 0.0, 0.0]], header, args, out)
        return EXIT_OK
    p = _params(args)
    g = _gamma(args)
    if what == "measure-atom":
        atoms = spectral.discrete_set_S(p)
        hit = [t for t in atoms if abs(t.gamma - g) <= 1e-9 * max(1.0, abs(g))]
        if not hit:
            raise DomainError(f"gamma={g} is not an atom of the discrete spectrum")
        t = hit[0]
        _emit([[what, f"{t.family}:{t.e}{t.k}", t.mass, 0.0, 0.0]], header, args, out)
        return EXIT_OK
    if what in ("c", "K"):
        if what == "c":
            vals = [("c(gamma)", complex(c_function(g, p)))]
        else:
            K, Kt = K_coefficients(g, p)
            vals = [("K", complex(K)), ("K~", complex(Kt))]
        _emit([[what, lab, v.real, v.imag, 0.0] for lab, v in vals], header, args, out)
        return EXIT_OK
    if args.x is not None:
        pts = [LatticePoint.parse(args.x)]
    else:
        win = _window(args)
        pts = win.points()
    xs = np.array([pt.value(p) for pt in pts])
    if what == "phi":
        val, err = eigen.phi_values(g, xs, p)
    elif what == "psi":
        val, err = eigen.psi_values(g, xs, p)
    else:
        val, err = _Phi_eval(g, pts, xs, p)
    val = np.atleast_1d(val)
    err = np.broadcast_to(np.atleast_1d(err), val.shape)
    rows = [[what, f"{pt.branch}:{pt.k}", float(v.real), float(v.imag), float(e)]
            for pt, v, e in zip(pts, val, err)]
    _emit(rows, header, args, out)
    return EXIT_OK


def _Phi_eval(g, pts, xs, p):
    """Phi at lattice points with an error estimate; NaN where none is available."""
    from . import eigen
    from .cfun import K_coefficients
    val = np.empty(len(pts), dtype=complex)
    err = np.full(len(pts), np.nan)
    pos = np.array([pt.branch == "pos" for pt in pts])
    if pos.any():
        v, e = eigen.phi_asym_pos_values(g, [pt.k for pt, s in zip(pts, pos) if s], p)
        val[pos], err[pos] = v, e
    if (~pos).any():
        val[~pos] = eigen.phi_asym_extended(g, xs[~pos], p)
        if not eigen.in_S_pol_plus(g, p)[0]:
            K, Kt = K_coefficients(g, p)
            ef = eigen.phi_values(g, xs[~pos], p)[1]
            eh = eigen.psi_values(g, xs[~pos], p)[1]
            err[~pos] = np.abs(K) * ef + np.abs(Kt) * eh
    return val, err


def cmd_verify(args, out):
    from .suites import SUITES, run_suite
    names = list(SUITES) if args.suite == "all" else [args.suite]
    rows = []
    for name in names:
        p = _params(args, polynomial=(name == "polynomial"))
        rows += run_suite(name, p, seed=args.seed, tol=args.tol)
    header = ["suite", "identity", "params", "residual", "tol", "pass"]
    _emit([[r.suite, r.identity, r.params, r.residual, r.tol, r.passed] for r in rows], header, args, out)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_TOLERANCE


def cmd_table(args, out):
    from . import spectral, transform
    name = args.table
    if name == "atoms":
        p = _params(args)
        rows = [[t.family, t.e, t.k, t.gamma, t.eigenvalue(p), t.mass, t.log_mass]
                for t in spectral.discrete_set_S(p)]
        _emit(rows, ["family", "e", "k", "gamma", "eigenvalue", "mass", "log_mass"], args, out)
    elif name == "hahn-gram":
        from .suites import hahn_system_of
        p = _params(args)
        n = 6 if args.n is None else args.n
        G, labels = transform.hahn_gram(hahn_system_of(p), p.q, n, (-10, 10))
        rows = [[lab] + [float(v) for v in G[i].real] for i, lab in enumerate(labels)]
        _emit(rows, ["row"] + labels, args, out)
    elif name == "bigq-norms":
        p = _params(args, polynomial=True)
        n = 8 if args.n is None else args.n
        G = transform.poly_gram(n - 1, p)
        rows = []
        for k in range(n):
            closed = transform.big_qjacobi_norm(k, p)
            lat = float(G[k, k].real)
            rows.append([k, closed, lat, abs(lat / closed - 1)])
        _emit(rows, ["n", "closed", "lattice", "rel_diff"], args, out)
    else:
        p = _params(args)
        n = 16 if args.n is None else args.n
        th = (np.arange(n) + 0.5) * math.pi / n
        d = spectral.continuous_density(th, p)
        _emit([[float(t), float(v)] for t, v in zip(th, d)], ["theta", "density"], args, out)
    return EXIT_OK


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        cmd = {"eval": cmd_eval, "verify": cmd_verify, "table": cmd_table}[args.command]
        return cmd(args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
