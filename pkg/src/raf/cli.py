"""Command-line driver: sweeps, cross-validation, rate fits, CSV emission.

Subcommands
-----------
bo              Bayes-optimal overlap and generalization error at (alpha, eps).
bo-rate         Large-alpha rate constant of the Bayes-optimal error.
state-eq        Solve the ERM (or finite-width) state equations at one point.
sweep-lambda    Trade-off curve lambda -> (E_gen, E_mem) on a lambda grid.
sweep-angle     E_gen at the cross-validated lambda as a function of the
                kernel angle gamma = arctan(mu1/mustar).
threshold       Hinge interpolation threshold alpha_c(eps).
rate            Log-log rate fit of E_gen(alpha) over a large-alpha grid.
cross-validate  lambda_opt and the errors at the optimum for one geometry.
mc              Finite-size Monte Carlo sweep over a lambda grid.
kernels         Hermite coefficients (mu0, mu1, mustar) of the built-in
                dot-product kernel families.

Every sweep emits CSV with a fixed column set (see CSV_COLUMNS); numeric
fields are printed with 17 significant digits so parsing recovers them
bit-exactly.  Rows that fail to converge are flagged in the status column
rather than dropped.  Exit codes: 0 success, 1 configuration error,
2 solver non-convergence.

Options may also be supplied through a flat key-value config file
(``--config run.cfg`` with lines like ``alpha = 2.2``); explicit flags take
precedence and unknown keys are rejected.  The environment variable
RAF_WORKERS sets the worker-pool size for sweep grids (default 1).
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bayes import bo_gen_error, bo_rate_constant, solve_bo
from .kernels import (FAMILY_TAGS, angle, geometry_from_angle, kernel_family,
                      KernelGeometry)
from .montecarlo import mc_sweep
from .state_eqs import (ErmSpec, RfSpec, gen_error, hinge_interp_threshold,
                        hinge_lambda_opt, krr_opt_errors, mem_error,
                        solve_kernel_state_eqs, solve_rf_state_eqs)

CSV_COLUMNS = ["sweep_value", "alpha", "eps", "mu1", "mustar", "lambda",
               "loss", "m", "q", "V", "e_gen", "e_mem", "source",
               "stderr_gen", "stderr_mem", "status"]

SWEEP_QUANTITIES = ("lambda", "angle", "alpha", "eps", "kappa")

DEFAULT_LAMBDA_GRID = (1e-5, 1e2, 60, "log")


class CliError(Exception):
    """Configuration / usage error (exit code 1)."""


class ConvergenceError(Exception):
    """Solver failed to converge (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _fmt(x) -> str:
    """17-significant-digit decimal; empty string for missing fields."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _emit_csv(rows, out_path=None):
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(
            row[c] if isinstance(row.get(c), str) else _fmt(row.get(c))
            for c in CSV_COLUMNS))
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        try:
            with open(out_path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError("cannot write output file: %s" % exc)


def parse_config(path):
    """Flat key-value file: one `key = value` per line, # comments."""
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise CliError("cannot read config file: %s" % exc)
    cfg = {}
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("config line %d is not `key = value`" % lineno)
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _merge_config(args, parser):
    """Overlay config-file values onto unset flags; reject unknown keys."""
    if getattr(args, "config", None) is None:
        return args
    cfg = parse_config(args.config)
    actions = {a.dest: a for a in parser._actions
               if a.dest not in ("help", "config")}
    for key, value in cfg.items():
        if key not in actions:
            raise CliError("unknown config key: %s" % key)
        if getattr(args, key) is not None:
            continue  # explicit flag wins
        act = actions[key]
        try:
            if act.type is not None:
                value = act.type(value)
        except (TypeError, ValueError):
            raise CliError("config key %s: invalid value %r" % (key, value))
        if act.choices is not None and value not in act.choices:
            raise CliError("config key %s: must be one of %s"
                           % (key, sorted(act.choices)))
        setattr(args, key, value)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            flag = "lambda" if name == "lam" else name.replace("_", "-")
            raise CliError("missing required option --%s" % flag)


def _check_eps(eps):
    if not 0.0 <= eps <= 1.0:
        raise CliError("eps must lie in [0, 1], got %g" % eps)


def _check_alpha(alpha):
    if alpha <= 0.0:
        raise CliError("alpha must be positive, got %g" % alpha)


def _geometry(args) -> KernelGeometry:
    mu1 = args.mu1 if args.mu1 is not None else 1.0
    mustar = args.mustar if args.mustar is not None else 0.0
    if mu1 <= 0.0:
        raise CliError("mu1 must be positive, got %g" % mu1)
    if mustar < 0.0:
        raise CliError("mustar must be nonnegative, got %g" % mustar)
    return KernelGeometry(mu0=0.0, mu1=mu1, mu_star=mustar)


def _grid(args, default=None):
    lo = args.grid_min if args.grid_min is not None else (
        default[0] if default else None)
    hi = args.grid_max if args.grid_max is not None else (
        default[1] if default else None)
    count = args.grid_count if args.grid_count is not None else (
        default[2] if default else None)
    spacing = args.grid_spacing if args.grid_spacing is not None else (
        default[3] if default else "linear")
    if lo is None or hi is None or count is None:
        raise CliError("grid requires --grid-min, --grid-max, --grid-count")
    if count < 2:
        raise CliError("grid count must be >= 2, got %d" % count)
    if not lo < hi:
        raise CliError("grid requires min < max")
    if spacing == "log":
        if lo <= 0.0:
            raise CliError("log spacing requires grid min > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


# ---------------------------------------------------------------------------
# sweep engine
# ---------------------------------------------------------------------------

def _theory_row(sweep_value, spec, op, status="ok"):
    return {"sweep_value": sweep_value, "alpha": spec.alpha, "eps": spec.eps,
            "mu1": spec.geom.mu1, "mustar": spec.geom.mu_star,
            "lambda": spec.lam, "loss": spec.loss,
            "m": op.m, "q": op.q, "V": op.V,
            "e_gen": gen_error(op.m, op.q), "e_mem": mem_error(op.q, op.V),
            "source": "theory", "stderr_gen": None, "stderr_mem": None,
            "status": status}


def _sweep_point(task):
    """One grid point of a theory sweep; picklable worker payload."""
    (quantity, value, loss, alpha, eps, mu1, mustar, lam, kappa) = task
    if quantity == "lambda":
        lam = value
    elif quantity == "alpha":
        alpha = value
    elif quantity == "eps":
        eps = value
    elif quantity == "kappa":
        kappa = value
    elif quantity == "angle":
        scale = np.hypot(mu1, mustar)
        geom = geometry_from_angle(value, scale=scale)
        mu1, mustar = geom.mu1, geom.mu_star
    geom = KernelGeometry(0.0, mu1, mustar)

    if quantity == "angle":
        # cross-validated lambda at each angle
        if loss == "square":
            lam_opt, eg, em = krr_opt_errors(alpha, eps, geom)
            spec = ErmSpec(loss, geom, max(lam_opt, 1e-9), alpha, eps)
            op = solve_kernel_state_eqs(spec)
        else:
            lam_opt, eg, em = hinge_lambda_opt(alpha, eps, geom)
            spec = ErmSpec(loss, geom, max(lam_opt, 1e-9), alpha, eps)
            op = solve_kernel_state_eqs(spec)
        row = _theory_row(value, spec, op,
                          "ok" if op.converged else "no-convergence")
        row["e_gen"], row["e_mem"], row["lambda"] = eg, em, lam_opt
        return row

    if kappa is not None:
        sol = solve_rf_state_eqs(RfSpec(loss, geom, lam, alpha, eps, kappa))
        op = sol.params
        spec = ErmSpec(loss, geom, lam, alpha, eps)
        return _theory_row(value, spec, op,
                           "ok" if op.converged else "no-convergence")
    spec = ErmSpec(loss, geom, lam, alpha, eps)
    op = solve_kernel_state_eqs(spec)
    return _theory_row(value, spec, op,
                       "ok" if op.converged else "no-convergence")


def run_sweep(quantity, grid, loss, alpha, eps, geom, lam, kappa=None,
              out_path=None):
    """Theory sweep over `quantity`; rows emitted in grid order."""
    if quantity not in SWEEP_QUANTITIES:
        raise CliError("unknown sweep quantity: %s" % quantity)
    if len(grid) == 0:
        raise CliError("empty sweep grid")
    tasks = [(quantity, float(v), loss, alpha, eps, geom.mu1, geom.mu_star,
              lam, kappa) for v in grid]
    workers = int(os.environ.get("RAF_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    _emit_csv(rows, out_path)
    if any(r["status"] != "ok" for r in rows):
        raise ConvergenceError("some sweep points did not converge")
    return rows


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

def fit_rate(pairs):
    """Least-squares power-law fit E_gen ~ C * alpha^p in log-log scale.

    Returns (exponent, coefficient, r_squared)."""
    pairs = [(float(a), float(e)) for a, e in pairs]
    if len(pairs) < 5:
        raise ValueError("rate fit requires at least 5 points")
    a = np.array([p[0] for p in pairs])
    e = np.array([p[1] for p in pairs])
    if np.any(a <= 0.0) or np.any(e <= 0.0):
        raise ValueError("rate fit requires positive alpha and E_gen")
    x, y = np.log(a), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), float(np.exp(intercept)), r2


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_bo(args):
    _require(args, "alpha", "eps")
    _check_alpha(args.alpha)
    _check_eps(args.eps)
    sol = solve_bo(args.alpha, args.eps)
    if not sol.converged:
        raise ConvergenceError("Bayes-optimal fixed point did not converge")
    print("q_b = %s" % _fmt(sol.q_b))
    print("e_gen = %s" % _fmt(bo_gen_error(sol.q_b)))


def _cmd_bo_rate(args):
    _require(args, "eps")
    if not 0.0 <= args.eps < 1.0:
        raise CliError("eps must lie in [0, 1) for the rate constant")
    print("rate_constant = %s" % _fmt(bo_rate_constant(args.eps)))


def _cmd_state_eq(args):
    _require(args, "loss", "alpha", "eps", "lam")
    _check_alpha(args.alpha)
    _check_eps(args.eps)
    if args.lam < 0.0:
        raise CliError("lambda must be nonnegative")
    geom = _geometry(args)
    if args.kappa is not None:
        sol = solve_rf_state_eqs(
            RfSpec(args.loss, geom, args.lam, args.alpha, args.eps,
                   args.kappa))
        op = sol.params
    else:
        op = solve_kernel_state_eqs(
            ErmSpec(args.loss, geom, args.lam, args.alpha, args.eps))
    spec = ErmSpec(args.loss, geom, args.lam, args.alpha, args.eps)
    _emit_csv([_theory_row(args.lam, spec, op,
                           "ok" if op.converged else "no-convergence")],
              args.out)
    if not op.converged:
        raise ConvergenceError("state equations did not converge")


def _cmd_sweep_lambda(args):
    _require(args, "loss", "alpha", "eps")
    _check_alpha(args.alpha)
    _check_eps(args.eps)
    grid = _grid(args, DEFAULT_LAMBDA_GRID)
    run_sweep("lambda", grid, args.loss, args.alpha, args.eps,
              _geometry(args), lam=None, kappa=args.kappa, out_path=args.out)


def _cmd_sweep_angle(args):
    _require(args, "loss", "alpha", "eps")
    _check_alpha(args.alpha)
    _check_eps(args.eps)
    default = (0.1, np.pi / 2 - 0.02, 25, "linear")
    grid = _grid(args, default)
    scale = args.scale if args.scale is not None else 1.0
    geom = geometry_from_angle(float(grid[0]), scale=scale)
    run_sweep("angle", grid, args.loss, args.alpha, args.eps, geom,
              lam=None, out_path=args.out)


def _cmd_threshold(args):
    _require(args, "loss", "eps")
    if args.loss != "hinge":
        raise CliError("interpolation threshold is defined for --loss hinge")
    if not 0.0 < args.eps <= 1.0:
        raise CliError("eps must lie in (0, 1] for the threshold")
    print("alpha_c = %s" % _fmt(hinge_interp_threshold(args.eps)))


def _cmd_rate(args):
    _require(args, "loss", "eps")
    _check_eps(args.eps)
    amin = args.grid_min if args.grid_min is not None else 15.0
    amax = args.grid_max if args.grid_max is not None else 1e4
    count = args.grid_count if args.grid_count is not None else 12
    if count < 5:
        raise CliError("rate fit requires at least 5 grid points")
    alphas = np.geomspace(amin, amax, count)
    pairs = []
    if args.loss == "bo":
        for a in alphas:
            sol = solve_bo(float(a), args.eps)
            if not sol.converged:
                raise ConvergenceError("BO solve failed at alpha=%g" % a)
            pairs.append((a, bo_gen_error(sol.q_b)))
    else:
        _require(args, "lam")
        geom = _geometry(args)
        for a in alphas:
            op = solve_kernel_state_eqs(
                ErmSpec(args.loss, geom, args.lam, float(a), args.eps))
            if not op.converged:
                raise ConvergenceError("solve failed at alpha=%g" % a)
            pairs.append((a, gen_error(op.m, op.q)))
    exponent, coeff, r2 = fit_rate(pairs)
    print("exponent = %s" % _fmt(exponent))
    print("coefficient = %s" % _fmt(coeff))
    print("r_squared = %s" % _fmt(r2))


def _cmd_cross_validate(args):
    _require(args, "loss", "alpha", "eps")
    _check_alpha(args.alpha)
    if not 0.0 <= args.eps < 1.0:
        raise CliError("cross-validation requires eps < 1")
    geom = _geometry(args)
    if args.loss == "square":
        lam_opt, eg, em = krr_opt_errors(args.alpha, args.eps, geom)
    else:
        lam_opt, eg, em = hinge_lambda_opt(args.alpha, args.eps, geom)
    print("lambda_opt = %s" % _fmt(lam_opt))
    print("e_gen = %s" % _fmt(eg))
    print("e_mem = %s" % _fmt(em))


def _parse_float_list(text):
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise CliError("expected a comma-separated list of numbers: %r"
                       % text)


def _cmd_mc(args):
    _require(args, "loss", "kernel", "alpha", "eps", "d")
    _check_alpha(args.alpha)
    _check_eps(args.eps)
    if args.d < 1:
        raise CliError("d must be >= 1")
    if args.repeats < 1:
        raise CliError("repeats must be >= 1")
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise CliError("kernel --param expects key=value, got %r" % item)
        key, value = item.split("=", 1)
        params[key.strip()] = float(value)
    try:
        kern = kernel_family(args.kernel, **params)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc))
    if args.lambda_grid is not None:
        lams = _parse_float_list(args.lambda_grid)
    else:
        lams = list(np.geomspace(1e-5, 1e2, 12))
    if any(l < 0 for l in lams):
        raise CliError("lambda grid values must be nonnegative")
    results = mc_sweep(args.loss, kern, args.alpha, args.eps, args.d, lams,
                       args.repeats, args.seed)
    geom = kern.geometry()
    rows = []
    for lam, res in zip(lams, results):
        rows.append({"sweep_value": lam, "alpha": args.alpha,
                     "eps": args.eps, "mu1": geom.mu1,
                     "mustar": geom.mu_star, "lambda": lam,
                     "loss": args.loss, "m": None, "q": None, "V": None,
                     "e_gen": res.e_gen_hat, "e_mem": res.e_mem_hat,
                     "source": "mc", "stderr_gen": res.stderr_gen,
                     "stderr_mem": res.stderr_mem, "status": "ok"})
    _emit_csv(rows, args.out)


_KERNEL_DEFAULTS = {"polynomial": {"c": 0.5, "m": 2},
                    "exponential": {"beta": 1.0},
                    "spherical-gaussian": {"eta": 1.0},
                    "geometric": {"g": 0.5},
                    "truncated-quadratic": {"mu1": 1.0, "mu_star": 1.0}}


def _cmd_kernels(args):
    print("family,mu0,mu1,mustar,angle")
    for tag in FAMILY_TAGS:
        geom = kernel_family(tag, **_KERNEL_DEFAULTS.get(tag, {})).geometry()
        print("%s,%s,%s,%s,%s" % (tag, _fmt(geom.mu0), _fmt(geom.mu1),
                                  _fmt(geom.mu_star), _fmt(angle(geom))))


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def _add_common(sp, *groups):
    sp.add_argument("--config", type=str, default=None,
                    help="flat key=value config file; flags take precedence")
    if "model" in groups:
        sp.add_argument("--loss", choices=("square", "hinge"), default=None)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--eps", type=float, default=None)
    if "geometry" in groups:
        sp.add_argument("--mu1", type=float, default=None)
        sp.add_argument("--mustar", type=float, default=None)
    if "lambda" in groups:
        sp.add_argument("--lambda", dest="lam", type=float, default=None)
    if "grid" in groups:
        sp.add_argument("--grid-min", type=float, default=None)
        sp.add_argument("--grid-max", type=float, default=None)
        sp.add_argument("--grid-count", type=int, default=None)
        sp.add_argument("--grid-spacing", choices=("linear", "log"),
                        default=None)
    if "out" in groups:
        sp.add_argument("--out", type=str, default=None,
                        help="CSV output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="raf",
                     description="Exact asymptotics of the rules-and-facts "
                                 "learning model.")
    sub = parser.add_subparsers(dest="command")

    sp = sub.add_parser("bo", help="Bayes-optimal point evaluation")
    _add_common(sp)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.set_defaults(func=_cmd_bo)

    sp = sub.add_parser("bo-rate", help="Bayes-optimal rate constant")
    _add_common(sp)
    sp.add_argument("--eps", type=float, default=None)
    sp.set_defaults(func=_cmd_bo_rate)

    sp = sub.add_parser("state-eq", help="single state-equation solve")
    _add_common(sp, "model", "geometry", "lambda", "out")
    sp.add_argument("--kappa", type=float, default=None,
                    help="finite width ratio p/d (omit for kernel limit)")
    sp.set_defaults(func=_cmd_state_eq)

    sp = sub.add_parser("sweep-lambda", help="trade-off curve over lambda")
    _add_common(sp, "model", "geometry", "grid", "out")
    sp.add_argument("--kappa", type=float, default=None)
    sp.set_defaults(func=_cmd_sweep_lambda)

    sp = sub.add_parser("sweep-angle",
                        help="cross-validated error over kernel angle")
    _add_common(sp, "model", "grid", "out")
    sp.add_argument("--scale", type=float, default=None,
                    help="overall kernel scale sqrt(mu1^2 + mustar^2)")
    sp.set_defaults(func=_cmd_sweep_angle)

    sp = sub.add_parser("threshold", help="hinge interpolation threshold")
    _add_common(sp)
    sp.add_argument("--loss", choices=("hinge",), default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.set_defaults(func=_cmd_threshold)

    sp = sub.add_parser("rate", help="log-log rate fit over alpha")
    _add_common(sp, "geometry", "lambda", "grid")
    sp.add_argument("--loss", choices=("bo", "square", "hinge"), default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.set_defaults(func=_cmd_rate)

    sp = sub.add_parser("cross-validate",
                        help="optimal lambda for one geometry")
    _add_common(sp, "model", "geometry")
    sp.set_defaults(func=_cmd_cross_validate)

    sp = sub.add_parser("mc", help="finite-size Monte Carlo sweep")
    _add_common(sp, "model", "out")
    sp.add_argument("--kernel", type=str, default=None,
                    help="kernel family tag (see `raf kernels`)")
    sp.add_argument("--param", action="append", default=None,
                    help="kernel family parameter key=value (repeatable)")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--lambda-grid", type=str, default=None,
                    help="comma-separated lambda values")
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_mc)

    sp = sub.add_parser("kernels", help="built-in kernel family coefficients")
    sp.set_defaults(func=_cmd_kernels)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_help()
            return 1
        sub = next(a for a in parser._subparsers._group_actions[0]
                   ._name_parser_map.items() if a[0] == args.command)[1]
        _merge_config(args, sub)
        args.func(args)
        return 0
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
