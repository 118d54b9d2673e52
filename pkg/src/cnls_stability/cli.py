"""Command-line front end.

Every run writes its artifacts plus a manifest.json (inputs, versions, wall
clock, sha256 of each output) into --out. Exit status: 0 success, 1 bad
configuration, 2 numerical failure (diagnostics in error.json).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
import traceback
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------- parsing helpers

def parse_range(text: str, with_count: bool = False) -> tuple:
    """'a:b' -> (a, b); with_count, 'a:b:n' -> (a, b, n)."""
    parts = text.split(":")
    try:
        if with_count:
            if len(parts) != 3:
                raise ValueError
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1 or (n == 1 and a != b):
                raise ValueError
            return a, b, n
        if len(parts) != 2:
            raise ValueError
        a, b = float(parts[0]), float(parts[1])
    except ValueError:
        form = "a:b:n" if with_count else "a:b"
        raise ConfigError(f"malformed range {text!r}, expected {form}") from None
    if not a < b:
        raise ConfigError(f"range {text!r} must be increasing")
    return a, b


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as a complex number") from None


def read_config(path) -> list[tuple[str, str]]:
    """key = value lines; '#' starts a comment; keys mirror the long flags."""
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        pairs.append((key.replace("_", "-"), val))
    return pairs


def _config_tokens(sub: argparse.ArgumentParser, pairs) -> list[str]:
    out = []
    for key, val in pairs:
        flag = "--" + key
        action = sub._option_string_actions.get(flag)
        if action is None:
            raise ConfigError(f"unknown configuration key {key!r} for this subcommand")
        if isinstance(action, argparse._StoreTrueAction):
            if val.lower() in ("1", "true", "yes", "on"):
                out.append(flag)
            elif val.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"{key} expects a boolean")
        else:
            out.extend([flag, val])
    return out


def _jsonable(obj):
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _fmt(v) -> str:
    return format(float(v), ".17g")


class Run:
    """Collects the files a subcommand writes; only this object touches the disk."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def write_json(self, name: str, data) -> Path:
        p = self.out / name
        p.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
        self.files.append(p)
        return p

    def write_csv(self, name: str, header, rows) -> Path:
        p = self.out / name
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.files.append(p)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.out / name
        p.write_text(text)
        self.files.append(p)
        return p


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _gnuplot(run: Run, plots) -> None:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set grid"]
    for title, csvname, cols in plots:
        lines.append(f"set title '{title}'")
        lines.append("plot " + ", ".join(f"'{csvname}' using {c} with lines" for c in cols))
        lines.append("pause -1")
    run.write_text("plot.gp", "\n".join(lines) + "\n")


def _params(args, beta1=None):
    from .model import ModelParams

    b1 = args.beta1 if beta1 is None else beta1
    return ModelParams(args.omega, args.s, b1, args.beta2)


# ---------------------------------------------------------------- subcommands

def cmd_melnikov(args, run: Run) -> dict:
    from . import melnikov as mk
    from .model import default_half_length, uniform_grid

    verdict = mk.classify_bifurcation(args.s, args.ell, args.beta2)
    result = {
        "s": args.s, "ell": args.ell, "beta2": args.beta2,
        "beta1_star": verdict.beta1_star, "a2": verdict.a2, "b2": verdict.b2,
        "mu_bar": verdict.mu_bar if verdict.a2 != 0 else None,
        "b2_threshold": mk.b2_threshold(args.s, args.ell),
        "verdict": verdict.kind,
    }
    if args.cross_check:
        result["a2_quadrature"] = mk.melnikov_a2(args.s, args.ell, method="quadrature")
        result["b2_quadrature"] = mk.melnikov_b2(args.s, args.ell, args.beta2, method="quadrature")
    run.write_json("melnikov.json", result)
    x = uniform_grid(default_half_length(1.0, args.s), args.grid)
    V1 = mk.v1_profile(args.s, args.ell, x)
    U2 = mk.u2_profile(args.s, args.ell, x)
    run.write_csv("profiles.csv", ["x", "V1", "U2"], zip(x, V1, U2))
    if args.gnuplot_script:
        _gnuplot(run, [("leading-order profiles", "profiles.csv", ["1:2", "1:3"])])
    print(f"beta1* = {verdict.beta1_star:.12g}  a2 = {verdict.a2:.12g}  b2 = {verdict.b2:.12g}  "
          f"-> {verdict.kind.value}")
    return result


def cmd_continue(args, run: Run) -> dict:
    from .continuation import branch_from_pitchfork, continue_branch, detect_pitchfork
    from .model import beta1_critical, fundamental_profile

    lo, hi = parse_range(args.beta1)
    params = _params(args, lo)
    fund = continue_branch(fundamental_profile(params), params, (lo, hi), n_intervals=args.intervals)
    run.write_csv("fundamental.csv", ["beta1", "v_norm", "u_max"],
                  ((p.beta1, p.v_norm, float(np.max(np.abs(p.profile.U)))) for p in fund.points))
    pitch = detect_pitchfork(fund, params, (lo, hi))
    result = {"beta1_range": [lo, hi], "pitchforks": pitch,
              "closed_form": [beta1_critical(args.s, ell, args.omega) for ell in range(len(pitch) + 4)
                              if lo <= beta1_critical(args.s, ell, args.omega) <= hi]}
    plots = [("fundamental branch", "fundamental.csv", ["1:2"])]
    if args.follow:
        branches = []
        for ell, b in enumerate(pitch):
            try:
                br = branch_from_pitchfork(params, args.s, ell, args.beta2, hi, eps=args.epsilon,
                                           n_intervals=args.intervals)
            except Exception as exc:
                branches.append({"ell": ell, "pitchfork": b, "error": f"{type(exc).__name__}: {exc}"})
                continue
            name = f"branch_ell{ell}.csv"
            run.write_csv(name, ["beta1", "v_norm"], ((p.beta1, p.v_norm) for p in br.points))
            branches.append({"ell": ell, "pitchfork": b, "points": len(br.points), "file": name})
            plots.append((f"branch ell={ell}", name, ["1:2"]))
        result["branches"] = branches
    run.write_json("pitchforks.json", result)
    if args.gnuplot_script:
        _gnuplot(run, plots)
    print("pitchforks at beta1 = " + ", ".join(f"{b:.10g}" for b in pitch))
    return result


def _evans_context(args):
    from . import evans as ev

    if args.family == "fundamental":
        params = _params(args)
        return ev.CoefficientMatrix.fundamental(params), params
    if args.ell is None:
        raise ConfigError("--family bifurcated needs --ell")
    if args.epsilon <= 0:
        raise ConfigError("--family bifurcated needs --epsilon > 0")
    if args.omega != 1.0:
        raise ConfigError("bifurcated waves are handled at omega = 1")
    if args.expansion:
        ctx = ev.CoefficientMatrix.from_expansion(args.s, args.ell, args.beta2, args.epsilon)
        return ctx, _params(args, ctx.meta.get("beta1", args.beta1))
    from .spectral import bifurcated_profile

    prof, params = bifurcated_profile(args.s, args.ell, args.beta2, args.epsilon)
    return ev.CoefficientMatrix.from_profile(prof, params), params


def cmd_evans(args, run: Run) -> dict:
    from . import evans as ev
    from . import spectral as spc

    if args.trace_eigenvalue is not None:
        if args.ell is None or args.epsilon_range is None:
            raise ConfigError("--trace-eigenvalue needs --ell and --epsilon-range")
        lam0 = parse_complex(args.trace_eigenvalue)
        a, b, n = parse_range(args.epsilon_range, with_count=True)
        eps_values = np.linspace(a, b, n)
        if eps_values[0] <= 0:
            raise ConfigError("epsilon values must be positive")
        path = spc.trace_eigenvalue(args.s, args.ell, args.beta2, lam0, eps_values,
                                    use_profile=not args.expansion)
        try:
            rec = spc.classify_case(lam0, args.s, args.ell, args.beta2)
            coeff = spc.perturbation_data(rec).re_coeff
        except Exception:
            coeff = None
        rows = [(e, z.real, z.imag, (coeff * e * e) if coeff is not None else float("nan")) for e, z in path]
        run.write_csv("trace.csv", ["epsilon", "re", "im", "predicted_re"], rows)
        eps_arr = np.array([r[0] for r in rows])
        re_arr = np.array([r[1] for r in rows])
        slope = None
        if len(rows) >= 2 and np.all(re_arr > 0):
            slope = float(np.polyfit(np.log(eps_arr), np.log(re_arr), 1)[0])
        result = {"lambda0": lam0, "re_coefficient": coeff, "loglog_slope": slope,
                  "path": [[e, z] for e, z in path]}
        run.write_json("trace.json", result)
        if args.gnuplot_script:
            _gnuplot(run, [("Re lambda vs epsilon", "trace.csv", ["1:2", "1:4"])])
        print(f"traced {len(path)} points; log-log slope {slope}")
        return result

    ctx, params = _evans_context(args)
    lams = [parse_complex(t) for t in (args.point or [])]
    if args.re or args.im:
        re = np.linspace(*parse_range(args.re or "0:0:1", True)) if args.re else np.array([0.0])
        im = np.linspace(*parse_range(args.im or "0:0:1", True)) if args.im else np.array([0.0])
        lams += [complex(a, b) for b in im for a in re]
    result = {"family": args.family, "params": params.to_dict(), "n_points": len(lams)}
    if lams:
        vals = ev.evans_grid(ctx, lams)
        header = ["re", "im", "E_re", "E_im"]
        rows = [[z.real, z.imag, v.real, v.imag] for z, v in zip(lams, vals)]
        if args.family == "fundamental" and params.is_cubic:
            header += ["closed_re", "closed_im", "relative_difference"]
            worst = 0.0
            for r, z, v in zip(rows, lams, vals):
                c = ev.evans_closed_fundamental(z, params).value
                d = abs(v - c) / abs(c) if c != 0 else float("nan")
                r += [c.real, c.imag, d]
                if math.isfinite(d):
                    worst = max(worst, d)
            result["max_relative_difference"] = worst
        run.write_csv("evans.csv", header, rows)
    if args.box:
        parts = args.box.split(":")
        if len(parts) != 4:
            raise ConfigError("--box expects re0:re1:im0:im1")
        try:
            rect = ev.Rectangle(*(float(p) for p in parts))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        zeros = ev.locate_zeros(ctx, rect)
        result["zeros"] = [{"lambda": z, "multiplicity": m, "kind": ev.classify_point(ctx, z).kind}
                           for z, m in zeros]
        print(f"{len(zeros)} zero(s) in the box")
    run.write_json("evans.json", result)
    if args.gnuplot_script and lams:
        _gnuplot(run, [("|E| along the grid", "evans.csv", ["0:(sqrt($3**2+$4**2))"])])
    return result


def cmd_stability(args, run: Run) -> dict:
    from .spectral import stability_report

    if args.ell is not None and args.epsilon > 0 and args.omega != 1.0:
        raise ConfigError("bifurcated waves are handled at omega = 1")
    rep = stability_report(args.s, args.beta2, ell=args.ell, eps=args.epsilon, beta1=args.beta1,
                           omega=args.omega, search=not args.no_search)
    d = rep.to_dict()
    run.write_json("stability.json", d)
    if rep.zeros:
        run.write_csv("zeros.csv", ["re", "im", "multiplicity"], ((z.real, z.imag, m) for z, m, _ in rep.zeros))
    if args.gnuplot_script and rep.zeros:
        _gnuplot(run, [("Evans zeros", "zeros.csv", ["1:2"])])
    print(rep.summary())
    return d


def specfun_checks() -> list[dict]:
    """Identities the special-function kernel must satisfy; used by specfun-selftest."""
    from . import specfun as sf

    checks = []

    def add(name, got, want, tol):
        err = abs(got - want) / max(abs(want), 1e-300)
        checks.append({"check": name, "value": got, "reference": want, "relative_error": err,
                       "tolerance": tol, "pass": bool(err <= tol)})

    add("gamma(1/2) = sqrt(pi)", sf.gamma(0.5), math.sqrt(math.pi), 1e-14)
    add("gamma(5) = 24", sf.gamma(5), 24.0, 1e-14)
    z = 0.3 + 2.1j
    add("reflection gamma(z)gamma(1-z)", sf.gamma(z) * sf.gamma(1 - z), math.pi / complex(np.sin(np.pi * z)), 1e-13)
    add("gamma recurrence", sf.gamma(z + 1), z * sf.gamma(z), 1e-13)
    add("pochhammer (3)_4 = 360", sf.pochhammer(3, 4), 360.0, 1e-15)
    a, b, c = 0.3, 0.7, 2.2
    add("Gauss sum 2F1(a,b;c;1)", sf.hyp2f1(a, b, c, 1.0),
        sf.gamma(c) * sf.gamma(c - a - b) / (sf.gamma(c - a) * sf.gamma(c - b)), 1e-13)
    add("2F1(1,1;2;z) = -log(1-z)/z", sf.hyp2f1(1, 1, 2, 0.5), -math.log(0.5) / 0.5, 1e-13)
    add("2F1 connection branch z=0.9", sf.hyp2f1(0.25, 0.6, 1.3 + 0.2j, 0.9),
        sf.hyp_pfq(a=(0.25, 0.6), b=(1.3 + 0.2j,), z=0.9), 1e-10)
    add("Saalschutz 3F2", sf.saalschutz_3f2(3, 0.4, 1.1, 2.5),
        sf.hyp_pfq(a=(-3, 0.4, 1.1), b=(2.5, -3 + 0.4 + 1.1 + 1 - 2.5), z=1.0), 1e-12)
    add("K_2 = 2", sf.sech_moment(2.0), 2.0, 1e-14)
    add("K_r(0) = K_r", sf.sech_fourier(3.3, 0.0), sf.sech_moment(3.3), 1e-13)
    add("K_{r+2} = r/(r+1) K_r", sf.sech_moment(5.0), 3 / 4 * sf.sech_moment(3.0), 1e-14)
    add("K_2(a) = pi a / sinh(pi a / 2)", sf.sech_fourier(2.0, 1.5), math.pi * 1.5 / math.sinh(math.pi * 0.75), 1e-13)
    add("P^0_1(z) = z", sf.legendre_p(1, 0, 0.3), 0.3, 1e-14)
    return checks


def cmd_selftest(args, run: Run) -> dict:
    checks = specfun_checks()
    run.write_json("selftest.json", {"checks": checks})
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check']}  rel.err {c['relative_error']:.2e}")
    if not all(c["pass"] for c in checks):
        raise ArithmeticError("special-function self-test failed")
    return {"passed": len(checks)}


# ---------------------------------------------------------------- parser and driver

def _model_flags(p, beta1_required=False, beta1_default=None):
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--beta2", type=float, required=True)
    if beta1_required:
        p.add_argument("--beta1", type=float, required=True)
    else:
        p.add_argument("--beta1", type=float, default=beta1_default)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cnls-stability", description="Solitary waves of coupled cubic NLS: "
                 "bifurcation, Evans function and spectral stability.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", help="key = value file mirroring the subcommand flags")
    ap.add_argument("--out", default="cnls_output", help="output directory")
    ap.add_argument("--threads", type=int, help="worker threads for lambda sweeps (else CNLS_THREADS)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("melnikov", help="Melnikov coefficients and criticality of a pitchfork")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--beta2", type=float, required=True)
    p.add_argument("--grid", type=int, default=4001)
    p.add_argument("--cross-check", action="store_true", help="also evaluate the quadrature routes")
    p.add_argument("--gnuplot-script", action="store_true")

    p = sub.add_parser("continue", help="continue the fundamental branch and locate pitchforks")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--beta2", type=float, required=True)
    p.add_argument("--beta1", required=True, help="range a:b")
    p.add_argument("--intervals", type=int, default=400)
    p.add_argument("--follow", action="store_true", help="also continue each bifurcated branch to the range end")
    p.add_argument("--epsilon", type=float, default=0.05, help="branch-switching amplitude")
    p.add_argument("--gnuplot-script", action="store_true")

    p = sub.add_parser("evans", help="Evans function on points, grids, boxes or along epsilon")
    _model_flags(p, beta1_default=None)
    p.add_argument("--family", choices=["fundamental", "bifurcated"], default="fundamental")
    p.add_argument("--ell", type=int)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--expansion", action="store_true", help="use the small-amplitude expansion, not a solved profile")
    p.add_argument("--point", action="append", help="lambda, e.g. 0.1+2.5i (repeatable)")
    p.add_argument("--re", help="grid of Re lambda a:b:n")
    p.add_argument("--im", help="grid of Im lambda a:b:n")
    p.add_argument("--box", help="count and locate zeros in re0:re1:im0:im1")
    p.add_argument("--trace-eigenvalue", metavar="LAMBDA0", help="follow the zero born at LAMBDA0")
    p.add_argument("--epsilon-range", help="a:b:n for --trace-eigenvalue")
    p.add_argument("--gnuplot-script", action="store_true")

    p = sub.add_parser("stability", help="Krein counts, Evans inventory and verdict")
    _model_flags(p)
    p.add_argument("--ell", type=int)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--no-search", action="store_true", help="skip the Evans zero search")
    p.add_argument("--gnuplot-script", action="store_true")

    p = sub.add_parser("specfun-selftest", help="check the special-function kernel")
    p.add_argument("--gnuplot-script", action="store_true")
    return ap


COMMANDS = {"melnikov": cmd_melnikov, "continue": cmd_continue, "evans": cmd_evans,
            "stability": cmd_stability, "specfun-selftest": cmd_selftest}


def _validate(args) -> None:
    for name in ("omega", "s"):
        v = getattr(args, name, None)
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"--{name} must be positive")
    if getattr(args, "ell", None) is not None and args.ell < 0:
        raise ConfigError("--ell must be non-negative")
    if getattr(args, "epsilon", 0.0) is not None and getattr(args, "epsilon", 0.0) < 0:
        raise ConfigError("--epsilon must be non-negative")
    if args.command == "continue":
        parse_range(args.beta1)
    if args.command in ("evans", "stability"):
        bif = args.ell is not None and args.epsilon > 0
        if args.command == "evans":
            bif = args.family == "bifurcated" or args.trace_eigenvalue is not None
        if not bif and args.beta1 is None:
            raise ConfigError("the fundamental wave needs --beta1")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be at least 1")


def _parse(argv):
    ap = build_parser()
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            pairs = read_config(known.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        subs = ap._subparsers._group_actions[0].choices
        i = next((k for k, tok in enumerate(argv) if tok in subs), None)
        if i is None:
            raise ConfigError("a subcommand is required")
        # config values first, so explicit flags on the command line win
        argv = argv[: i + 1] + _config_tokens(subs[argv[i]], pairs) + argv[i + 1:]
    return ap.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.time()
    try:
        args = _parse(argv)
        _validate(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    if args.threads is not None:
        os.environ["CNLS_THREADS"] = str(args.threads)
    run = Run(Path(args.out))
    status, code, result = "ok", 0, None
    try:
        result = COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        status, code = "config_error", 1
        run.write_json("error.json", {"kind": "configuration", "message": str(exc)})
    except Exception as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        status, code = "numerical_failure", 2
        run.write_json("error.json", {"kind": "numerical", "exception": type(exc).__name__,
                                      "message": str(exc), "traceback": traceback.format_exc()})
    manifest = {
        "tool": "cnls-stability", "version": __version__, "command": args.command,
        "argv": argv, "arguments": {k: v for k, v in sorted(vars(args).items())},
        "threads": os.environ.get("CNLS_THREADS", "1"),
        "python": platform.python_version(), "numpy": np.__version__,
        "status": status, "exit_code": code,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(t0)),
        "wall_clock_seconds": time.time() - t0,
        "outputs": [{"path": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)} for p in run.files],
    }
    (run.out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
