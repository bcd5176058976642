"""Command-line front end.

Exit status: 0 success, 1 invalid input (bad flag, unreadable file, failed
precondition), 2 runtime or numerical failure, 3 a theory check reported a
violation. Every error is reported as one stderr line of the form
``pmols: <category>: <ExceptionName>: <message>``.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import experiments as exp
from . import imaging, theory
from .errors import NumericalError, PgmFormatError, PmolsError, ValidationError
from .linalg import RANK_TOL, frobenius_distance_to_identity, mutual_coherence
from .precondition import modified_pip, parseval_check, pip_preconditioner
from .recovery import DEFAULT_REL_TOL, SolverParams, mols, pmols

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME, EXIT_VIOLATION = 0, 1, 2, 3
PROG = "pmols"


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route it through our codes
    def error(self, message):
        raise UsageError(message)


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    def _get_help_string(self, action):
        # help strings that describe their own default keep that wording
        if "(default" in (action.help or "") or action.default is None or action.const is True:
            return action.help
        return super()._get_help_string(action)


@dataclass
class CliConfig:
    """Parsed command line: the subcommand path plus its options."""

    command: tuple
    options: dict = field(default_factory=dict)


# --- argument types ------------------------------------------------------------------


def parse_range(text, cast=float):
    """``start:stop:step`` (stop excluded) or a comma-separated list."""
    text = text.strip()
    if ":" not in text:
        try:
            return tuple(cast(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"range {text!r} must look like start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
    if not step > 0 or not math.isfinite(start + stop + step):
        raise argparse.ArgumentTypeError(f"range {text!r} needs a positive finite step")
    count = max(0, math.ceil((stop - start) / step - 1e-9))
    values = [round(start + i * step, 12) for i in range(count)]
    if cast is int:
        if any(v != int(v) for v in values):
            raise argparse.ArgumentTypeError(f"range {text!r} must produce integers")
        return tuple(int(v) for v in values)
    return tuple(values)


def _int_range(text):
    return parse_range(text, int)


def _float_list(text):
    return parse_range(text, float)


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _samples(text):
    """``name=m,name=m`` pairs for the imaging experiment."""
    out = []
    for item in _str_list(text):
        name, sep, m = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected name=m, got {item!r}")
        try:
            out.append((name, int(m)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad sample count in {item!r}") from None
    return tuple(out)


# --- CSV exchange ---------------------------------------------------------------------


def read_matrix(path):
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path} is not a numeric CSV matrix: {exc}") from None
    return a


def read_vector(path):
    a = read_matrix(path)
    if 1 not in a.shape:
        raise ValidationError(f"{path} holds a {a.shape[0]}x{a.shape[1]} matrix, expected a vector")
    return a.ravel()


def format_matrix(a):
    a = np.atleast_2d(a)
    return "".join(",".join(format(float(v), ".17g") for v in row) + "\n" for row in a)


def write_matrix(a, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_matrix(a))


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- subcommands -------------------------------------------------------------------------


def _cmd_coherence(opts):
    psi = read_matrix(opts["matrix"])
    mu = mutual_coherence(psi)
    lines = [f"shape={psi.shape[0]}x{psi.shape[1]}", f"mu_psi={exp.fmt(mu)}"]
    if opts["precondition"] == "pip":
        pre = pip_preconditioner(psi, opts["rank_tol"])
        mu_p = mutual_coherence(pre.P @ psi, skip_zero_columns=True, zero_tol=theory.ZERO_COLUMN_TOL)
        lines.append(f"mu_ppsi={exp.fmt(mu_p)}")
        lines.append(f"nu_m={'' if pre.nu_m is None else exp.fmt(pre.nu_m)}")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_precondition(opts):
    psi = read_matrix(opts["matrix"])
    if opts["mode"] == "pip":
        pre = pip_preconditioner(psi, opts["rank_tol"])
    else:
        pre = modified_pip(psi, _need_lam(opts), opts["rank_tol"])
    phi = pre.P @ psi
    lines = [
        f"method={pre.method}",
        f"rank={pre.source_rank}",
        f"nu_m={'' if pre.nu_m is None else exp.fmt(pre.nu_m)}",
        f"frobenius_distance_to_identity={exp.fmt(frobenius_distance_to_identity(phi))}",
        f"parseval_deviation={exp.fmt(parseval_check(phi).max_deviation)}",
        f"mu_ppsi={exp.fmt(mutual_coherence(phi, skip_zero_columns=True, zero_tol=theory.ZERO_COLUMN_TOL))}",
    ]
    if opts["out"]:
        write_matrix(pre.P, opts["out"])
    if opts["phi_out"]:
        write_matrix(phi, opts["phi_out"])
    print("\n".join(lines))
    return EXIT_OK


def _need_lam(opts):
    if opts.get("lam") is None:
        raise ValidationError("--lam is required with --mode modified_pip")
    return opts["lam"]


def _cmd_recover(opts):
    psi = read_matrix(opts["matrix"])
    y0 = read_vector(opts["samples"])
    params = SolverParams(
        K=opts["K"], s=opts["s"], tol=opts["tol"], max_iters=opts["max_iters"],
        enforce_selection_bound=not opts["no_selection_bound"],
    )
    if opts["mode"] == "none":
        res = mols(psi, y0, params)
    else:
        lam = _need_lam(opts) if opts["mode"] == "modified_pip" else None
        res = pmols(psi, y0, params, mode=opts["mode"], lam=lam)
    lines = [
        "support=" + " ".join(str(int(i)) for i in res.support),
        f"iterations={res.iterations}",
        f"termination={res.termination.value}",
        f"residual_norm={exp.fmt(res.residual_norms[-1])}",
    ]
    if opts["out"]:
        write_matrix(res.x_hat[:, None], opts["out"])
    else:
        lines.append("x_hat=" + ",".join(format(float(v), ".17g") for v in res.x_hat))
    print("\n".join(lines))
    return EXIT_OK


def _workers(opts):
    return exp.default_workers() if opts["workers"] is None else opts["workers"]


def _cmd_coherence_sweep(opts):
    cfg = exp.CoherenceSweepConfig(n=opts["n"], rates=opts["rates"], trials=opts["trials"], seed=opts["seed"])
    cfg.validate()
    rows = exp.coherence_sweep(cfg, workers=_workers(opts))
    _emit(exp.write_csv(rows, exp.COHERENCE_FIELDS), opts["out"])
    return EXIT_OK


def _cmd_recovery_freq(opts):
    cfg = exp.RecoveryConfig(
        n=opts["n"], m=opts["m"], K_grid=opts["K"], kinds=opts["kinds"], s=opts["s"],
        trials=opts["trials"], seed=opts["seed"], methods=opts["methods"], cap_rule=opts["cap_rule"],
        enforce_selection_bound=not opts["no_selection_bound"],
    )
    cfg.validate()
    rows = exp.recovery_frequency(cfg, workers=_workers(opts))
    _emit(exp.write_csv(rows, exp.RECOVERY_FIELDS), opts["out"])
    return EXIT_OK


def _cmd_noise_sweep(opts):
    cfg = exp.NoiseConfig(
        n=opts["n"], m=opts["m"], K=opts["K"], s=opts["s"], snrs=opts["snrs"], lambdas=opts["lambdas"],
        trials=opts["trials"], seed=opts["seed"], cap_rule=opts["cap_rule"],
    )
    cfg.validate()
    rows = exp.noise_sweep(cfg, workers=_workers(opts))
    _emit(exp.write_csv(rows, exp.NOISE_FIELDS), opts["out"])
    return EXIT_OK


def _cmd_imaging(opts):
    cfg = exp.ImagingConfig(
        samples=opts["samples"], object_dir=opts["objects"], s=opts["s"], seed=opts["seed"],
        methods=opts["methods"], cap_rule=opts["cap_rule"],
    )
    cfg.validate()
    if opts["write_objects"]:
        imaging.write_synthetic_objects(opts["write_objects"])
    images = {} if opts["save_images"] else None
    rows = exp.imaging_experiment(cfg, images=images)
    if images:
        os.makedirs(opts["save_images"], exist_ok=True)
        for (name, m, method), px in sorted(images.items()):
            imaging.save_pgm(np.round(px), os.path.join(opts["save_images"], f"{name}_m{m}_{method}.pgm"))
    _emit(exp.write_csv(rows, exp.IMAGING_FIELDS), opts["out"])
    return EXIT_OK


def _cmd_check(opts):
    names = list(theory.FAMILIES) if opts["name"] == "all" else [opts["name"]]
    reports = [theory.run_family(name, opts["seed"]) for name in names]
    _emit(exp.write_csv([r.as_row() for r in reports], theory.REPORT_FIELDS), opts["out"])
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION


# --- parser -----------------------------------------------------------------------------------


def _add_common_exp(p, trials, seed=0):
    p.add_argument("--trials", type=int, default=trials, help="Monte Carlo trials per grid point")
    p.add_argument("--seed", type=int, default=seed, help="master seed")
    p.add_argument(
        "--workers", type=int, default=None,
        help=f"worker processes (default: ${exp.WORKERS_ENV} or the number of cores)",
    )
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")


def build_parser():
    parser = _Parser(
        prog=PROG,
        description="Pseudo-inverse preconditioning and multiple orthogonal least squares.",
        formatter_class=_Formatter,
        epilog="Ranges use start:stop:step with stop excluded (e.g. 0.05:1.0:0.05), or a comma list.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("coherence", help="mutual coherence of a CSV matrix", formatter_class=_Formatter)
    p.add_argument("--matrix", required=True, help="CSV matrix, one row per line, no header")
    p.add_argument("--precondition", choices=("pip", "none"), default="pip", help="also report mu(P psi)")
    p.add_argument("--rank-tol", type=float, default=RANK_TOL, help="relative singular value cutoff")
    p.set_defaults(handler=_cmd_coherence)

    p = sub.add_parser("precondition", help="build P for a CSV matrix and report P psi", formatter_class=_Formatter)
    p.add_argument("--matrix", required=True, help="CSV matrix, one row per line, no header")
    p.add_argument("--mode", choices=("pip", "modified_pip"), default="pip", help="preconditioner")
    p.add_argument("--lam", type=float, default=None, help="ridge parameter for modified_pip")
    p.add_argument("--rank-tol", type=float, default=RANK_TOL, help="relative singular value cutoff")
    p.add_argument("--out", default=None, help="write P as CSV")
    p.add_argument("--phi-out", default=None, help="write P psi as CSV")
    p.set_defaults(handler=_cmd_precondition)

    p = sub.add_parser("recover", help="recover one sparse vector from CSV inputs", formatter_class=_Formatter)
    p.add_argument("--matrix", required=True, help="sampling matrix psi as CSV")
    p.add_argument("--samples", required=True, help="samples y0 as CSV (one value per line or one row)")
    p.add_argument("--K", type=int, required=True, help="sparsity level")
    p.add_argument("--s", type=int, default=1, help="indices selected per iteration")
    p.add_argument("--mode", choices=("pip", "modified_pip", "none"), default="pip", help="preconditioning")
    p.add_argument("--lam", type=float, default=None, help="ridge parameter for modified_pip")
    p.add_argument(
        "--tol", type=float, default=None,
        help=f"absolute residual tolerance (default: {DEFAULT_REL_TOL:g} * ||y||)",
    )
    p.add_argument("--max-iters", type=int, default=None, help="iteration cap (default: floor(min(K, m/K)))")
    p.add_argument("--no-selection-bound", action="store_true", help="allow s > floor(m/K)")
    p.add_argument("--out", default=None, help="write x_hat as a one-column CSV instead of printing it")
    p.set_defaults(handler=_cmd_recover)

    pe = sub.add_parser("exp", help="seeded experiments with CSV output", formatter_class=_Formatter)
    esub = pe.add_subparsers(dest="experiment", required=True, parser_class=_Parser)

    d = exp.CoherenceSweepConfig()
    p = esub.add_parser("coherence-sweep", help="mu(psi) and mu(P psi) versus m/n", formatter_class=_Formatter)
    p.add_argument("--n", type=int, default=d.n, help="signal length")
    p.add_argument("--rates", type=_float_list, default="0.05:1.0:0.05", help="sampling rates m/n")
    _add_common_exp(p, d.trials)
    p.set_defaults(handler=_cmd_coherence_sweep)

    d = exp.RecoveryConfig()
    p = esub.add_parser("recovery-freq", help="exact recovery frequency versus K", formatter_class=_Formatter)
    p.add_argument("--n", type=int, default=d.n, help="signal length")
    p.add_argument("--m", type=int, default=d.m, help="number of samples")
    p.add_argument("--K", type=_int_range, default="5:65:5", help="sparsity grid")
    p.add_argument("--kinds", type=_str_list, default=",".join(d.kinds), help="signal kinds")
    p.add_argument("--s", type=int, default=d.s, help="indices selected per iteration")
    p.add_argument(
        "--methods", type=_str_list, default=",".join(d.methods),
        help="solvers: OMP, mOLS, PmOLS, ModifiedPmOLS:<lambda>",
    )
    p.add_argument("--cap-rule", choices=exp.CAP_RULES, default=d.cap_rule, help="iteration cap rule")
    p.add_argument("--no-selection-bound", action="store_true", help="keep K where s > floor(m/K)")
    _add_common_exp(p, d.trials)
    p.set_defaults(handler=_cmd_recovery_freq)

    d = exp.NoiseConfig()
    p = esub.add_parser("noise-sweep", help="MSE of PmOLS and modified PmOLS versus SNR", formatter_class=_Formatter)
    p.add_argument("--n", type=int, default=d.n, help="signal length")
    p.add_argument("--m", type=int, default=d.m, help="number of samples")
    p.add_argument("--K", type=int, default=d.K, help="sparsity level")
    p.add_argument("--s", type=int, default=d.s, help="indices selected per iteration")
    p.add_argument("--snrs", type=_float_list, default=",".join(str(v) for v in d.snrs), help="SNR grid in dB")
    p.add_argument(
        "--lambdas", type=_float_list, default=",".join(str(v) for v in d.lambdas),
        help="ridge parameters for modified PmOLS",
    )
    p.add_argument("--cap-rule", choices=exp.CAP_RULES, default=d.cap_rule, help="iteration cap rule")
    _add_common_exp(p, d.trials)
    p.set_defaults(handler=_cmd_noise_sweep)

    d = exp.ImagingConfig()
    p = esub.add_parser("imaging", help="synthetic imaging: GI versus mOLS versus PmOLS", formatter_class=_Formatter)
    p.add_argument(
        "--samples", type=_samples, default=",".join(f"{k}={v}" for k, v in d.samples),
        help="object=m pairs",
    )
    p.add_argument("--objects", default=None, help="directory of <object>.pgm files (default: built-in objects)")
    p.add_argument("--s", type=int, default=d.s, help="indices selected per iteration")
    p.add_argument("--methods", type=_str_list, default=",".join(d.methods), help="GI, mOLS, PmOLS")
    p.add_argument("--cap-rule", choices=exp.CAP_RULES, default=d.cap_rule, help="iteration cap rule")
    p.add_argument("--seed", type=int, default=d.seed, help="master seed")
    p.add_argument("--write-objects", default=None, help="write the built-in objects as PGM to this directory")
    p.add_argument("--save-images", default=None, help="write reconstructions as PGM to this directory")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.set_defaults(handler=_cmd_imaging)

    p = sub.add_parser("check", help="run inequality checks on their seeded instance families", formatter_class=_Formatter)
    p.add_argument("name", choices=("all",) + tuple(theory.FAMILIES), help="check to run")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.set_defaults(handler=_cmd_check)
    return parser


def parse(argv):
    args = build_parser().parse_args(argv)
    opts = vars(args).copy()
    handler = opts.pop("handler")
    command = (opts.pop("command"),) + ((opts.pop("experiment"),) if "experiment" in opts else ())
    return CliConfig(command=command, options=opts), handler


def _fail(category, exc, code):
    msg = " ".join(str(exc).split())
    sys.stderr.write(f"{PROG}: {category}: {type(exc).__name__}: {msg}\n")
    return code


def run(argv=None):
    """Run the command line ``argv`` and return the exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config, handler = parse(argv)
    except ValidationError as exc:
        return _fail("usage", exc, EXIT_INPUT)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if config.options.get("verbose") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return handler(config.options)
    except (ValidationError, PgmFormatError) as exc:
        return _fail("invalid-input", exc, EXIT_INPUT)
    except OSError as exc:
        return _fail("io", exc, EXIT_INPUT)
    except (NumericalError, PmolsError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail("runtime", exc, EXIT_RUNTIME)


def main():
    sys.exit(run())
