"""Command-line interface: ``rftlattice <subcommand> [options]``."""

import argparse
import contextlib
import csv
import io
import json
import math
import sys
from typing import List, Optional, Sequence

from .comparator import (
    BRAIN_VOLUME_MM3,
    bonferroni_threshold,
    crossover_smoothness,
    fmt6,
    lattice_resels,
    sweep,
    voxel_count,
    write_sweep_csv,
)
from .errors import DomainError, NoBracketError, UnattainableError
from .fieldsim import SIM_REPORT_HEADER, SimConfig, empirical_fwe
from .rft import FieldSpec, LatticeSpec, rft_threshold
from .survey import (
    RATIO_MODES,
    MalformedHeaderError,
    ResidualQuantiles,
    ingest,
    load_synthetic_survey,
    summarize,
)

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> List[float]:
    """``start:end[:step]`` inclusive (step defaults to 1) or a comma list."""
    if ":" not in text:
        return parse_list(text)
    parts = [float(p) for p in text.split(":")]
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"bad range {text!r}; expected start:end[:step]")
    start, end = parts[0], parts[1]
    step = parts[2] if len(parts) == 3 else 1.0
    if step <= 0 or end < start:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def parse_list(text: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_triple(text: str) -> tuple:
    """A single number (isotropic) or ``x,y,z``."""
    values = parse_list(text)
    if len(values) == 1:
        return (values[0],) * 3
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected one or three numbers, got {text!r}")
    return tuple(values)


def _int_triple(text: str) -> tuple:
    values = parse_triple(text)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in values)


def _common(p: argparse.ArgumentParser, volume: bool = True) -> None:
    p.add_argument("--alpha", type=float, default=0.05, help="family-wise error rate (default: 0.05)")
    if volume:
        p.add_argument(
            "--volume", type=float, default=BRAIN_VOLUME_MM3,
            help="search volume in mm^3 (default: 1.4e6, a 1.4 litre brain)",
        )
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--json", dest="json_path", help="also write full-precision results as JSON to this path")


def _field_args(p: argparse.ArgumentParser, df_help: str, df_type=float) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--df", type=df_type, help=df_help)
    g.add_argument("--gaussian", action="store_true", help="use a Gaussian field instead of a t-field")


def _resels_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--resels", choices=("simplified", "cuboid"), default="simplified",
        help="resel model: volume term only (default) or a cube with all four terms",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="rftlattice",
        description="RFT and Bonferroni family-wise error thresholds on sampled random fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser(
        "threshold", help="RFT and Bonferroni thresholds for one lattice",
        description="Columns: voxel_mm,fwhm_mm,df,n_voxels,resels,t_rft,t_bonferroni,rft_valid. "
        "Triples are written as x;y;z.",
    )
    p.add_argument("--voxel", type=parse_triple, required=True, help="voxel size in mm: v or x,y,z")
    p.add_argument("--fwhm", type=parse_triple, required=True, help="field smoothness FWHM in mm: f or x,y,z")
    _field_args(p, "degrees of freedom of the t-field")
    _resels_arg(p)
    _common(p)

    p = sub.add_parser(
        "crossover", help="smoothness ratio at which RFT and Bonferroni agree",
        description="Columns: voxel_mm,df,crossover_ratio. crossover_ratio is below_range or above_range "
        "when the thresholds do not cross inside --ratio-range.",
    )
    p.add_argument("--voxels", type=parse_list, required=True, help="isotropic voxel sizes in mm, e.g. 1,2,3")
    _field_args(p, "degrees of freedom: start:end[:step] or comma list", parse_range)
    p.add_argument("--ratio-range", type=parse_range, default=[1.0, 6.0], help="ratio search interval lo:hi (default 1:6)")
    _resels_arg(p)
    _common(p)

    p = sub.add_parser(
        "sweep", help="threshold grid over voxel size, df and smoothness ratio",
        description="Columns: voxel_mm,df,smoothness_ratio,t_rft,t_bonferroni,rft_valid. t_rft holds "
        "'unattainable' or 'no_bracket' where the RFT threshold does not exist.",
    )
    p.add_argument("--voxels", type=parse_list, required=True, help="isotropic voxel sizes in mm, e.g. 1,2,3")
    p.add_argument("--df", type=parse_range, required=True, help="degrees of freedom: start:end[:step], e.g. 10:100")
    p.add_argument("--ratio", type=parse_range, required=True, help="FWHM/voxel ratios: start:end:step, e.g. 1:6:0.1")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1); output is identical")
    _resels_arg(p)
    _common(p)

    p = sub.add_parser(
        "survey", help="normal model of FWHM/voxel ratios from a study table",
        description="Input columns: study_id,voxel_x_mm,voxel_y_mm,voxel_z_mm,applied_fwhm_mm,software,"
        "correction_method,uses_rft. Text output is a readable report; CSV output has columns "
        "quantity,value. Rejected rows are listed on standard error.",
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="study CSV path, or - for standard input")
    src.add_argument("--synthetic", action="store_true", help="use the bundled synthetic 137-study table")
    p.add_argument("--critical", type=float, default=3.5, help="critical FWHM/voxel ratio (default 3.5)")
    p.add_argument(
        "--quantiles", type=parse_list, default=[1.26, 1.36, 1.77],
        help="residual smoothness multipliers q05,q50,q95 (default 1.26,1.36,1.77)",
    )
    p.add_argument("--mode", choices=RATIO_MODES, default="in_plane", help="voxel size used in the ratio (default in_plane)")
    p.add_argument("--format", choices=("text", "csv"), default="text", help="report format (default text)")
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--json", dest="json_path", help="also write full-precision results as JSON to this path")

    p = sub.add_parser(
        "simulate", help="Monte Carlo family-wise error rate at a threshold",
        description="Columns: " + ",".join(SIM_REPORT_HEADER) + ". Realization i uses seed key "
        "(seed, i); component j of a t-field uses (seed, i, j).",
    )
    p.add_argument("--dims", type=_int_triple, default=(32, 32, 32), help="lattice size n or x,y,z (default 32)")
    p.add_argument("--fwhm", type=parse_triple, default=(0.0, 0.0, 0.0), help="kernel FWHM in voxels (default 0)")
    _field_args(p, "integer degrees of freedom of the t-field", int)
    p.add_argument("--realizations", type=int, default=1000, help="number of realizations (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument(
        "--threshold", default="bonferroni",
        help="a number, or 'rft' / 'bonferroni' computed for this lattice at --alpha (default bonferroni)",
    )
    _common(p, volume=False)
    return parser


def _field(args) -> FieldSpec:
    return FieldSpec.gaussian() if args.gaussian else FieldSpec.student_t(args.df)


def _triple(t) -> str:
    return ";".join(fmt6(v) for v in t)


def _run_threshold(args, out):
    field = _field(args)
    spec = LatticeSpec(args.voxel, args.fwhm, args.volume)
    n = voxel_count(spec.volume_mm3, spec.voxel_mm)
    resels = lattice_resels(spec, args.resels)
    t_rft = rft_threshold(args.alpha, resels, field)
    t_bonf = bonferroni_threshold(args.alpha, n, field)
    df = "inf" if field.is_gaussian else fmt6(field.nu)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("voxel_mm", "fwhm_mm", "df", "n_voxels", "resels", "t_rft", "t_bonferroni", "rft_valid"))
    w.writerow((_triple(spec.voxel_mm), _triple(spec.fwhm_mm), df, n, fmt6(resels.r3), fmt6(t_rft), fmt6(t_bonf),
                "true" if t_rft <= t_bonf else "false"))
    return {
        "voxel_mm": spec.voxel_mm, "fwhm_mm": spec.fwhm_mm, "field": str(field), "n_voxels": n,
        "resels": resels.as_tuple(), "t_rft": t_rft, "t_bonferroni": t_bonf, "rft_valid": t_rft <= t_bonf,
    }


def _run_crossover(args, out):
    lo, hi = args.ratio_range[0], args.ratio_range[-1]
    nus = [None] if args.gaussian else args.df
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("voxel_mm", "df", "crossover_ratio"))
    rows = []
    for v in sorted(args.voxels):
        for nu in nus:
            s = crossover_smoothness(v, nu, args.alpha, args.volume, args.resels, (lo, hi))
            w.writerow((fmt6(v), "inf" if nu is None else fmt6(nu), s if isinstance(s, str) else fmt6(s)))
            rows.append({"voxel_mm": v, "df": nu, "crossover_ratio": s})
    return rows


def _run_sweep(args, out):
    cells = sweep(args.voxels, args.df, args.ratio, args.alpha, args.volume, args.resels, args.workers)
    write_sweep_csv(cells, out)
    return [
        {
            "voxel_mm": c.voxel_mm, "df": c.nu, "smoothness_ratio": c.smoothness_ratio,
            "t_rft": None if c.pair is None else c.pair.t_rft, "t_bonferroni": c.t_bonferroni,
            "rft_valid": c.rft_valid, "error": c.error,
        }
        for c in cells
    ]


def _run_survey(args, out):
    if len(args.quantiles) != 3:
        raise DomainError("--quantiles needs three values")
    if args.synthetic:
        report = load_synthetic_survey()
    elif args.input == "-":
        report = ingest(sys.stdin)
    else:
        with open(args.input, newline="") as fh:
            report = ingest(fh)
    for bad in report.rejects:
        print(f"rejected line {bad.line}: {bad.reason}", file=sys.stderr)
    summary = summarize(report, args.critical, ResidualQuantiles(*args.quantiles), args.mode)
    if args.format == "text":
        out.write(summary.to_text())
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("quantity", "value"))
        w.writerows(summary.as_rows())
    result = {k: v for k, v in summary.as_rows()}
    result.update(
        ratio_mean=summary.model.mean, ratio_sd=summary.model.sd, prob_meets_assumption=summary.prob_meets,
        fail_pct=[summary.fail_low, summary.fail_median, summary.fail_high],
        rejects=[{"line": b.line, "reason": b.reason} for b in report.rejects],
    )
    return result


def _run_simulate(args, out):
    field = _field(args)
    config = SimConfig(args.dims, args.fwhm, field, args.realizations, args.seed)
    if args.threshold in ("rft", "bonferroni"):
        if args.threshold == "bonferroni":
            threshold = bonferroni_threshold(args.alpha, config.n_voxels, field)
        else:
            if min(config.fwhm_vox) <= 0:
                raise DomainError("an RFT threshold needs fwhm > 0 on every axis")
            spec = LatticeSpec((1.0, 1.0, 1.0), config.fwhm_vox, float(config.n_voxels))
            threshold = rft_threshold(args.alpha, lattice_resels(spec), field)
    else:
        try:
            threshold = float(args.threshold)
        except ValueError:
            raise DomainError(f"--threshold must be a number, 'rft' or 'bonferroni', got {args.threshold!r}") from None
    est = empirical_fwe(config, threshold)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SIM_REPORT_HEADER)
    w.writerow((
        est.trials, est.rejections, fmt6(est.rate), fmt6(est.ci_low), fmt6(est.ci_high), fmt6(threshold),
        "x".join(str(d) for d in config.dims), "x".join(fmt6(f) for f in config.fwhm_vox),
        field.family, "" if field.is_gaussian else fmt6(field.nu), config.master_seed,
    ))
    return {
        "trials": est.trials, "rejections": est.rejections, "rate": est.rate, "ci_low": est.ci_low,
        "ci_high": est.ci_high, "threshold": threshold, "dims": config.dims, "fwhm_vox": config.fwhm_vox,
        "family": field.family, "nu": field.nu, "master_seed": config.master_seed,
    }


_COMMANDS = {
    "threshold": _run_threshold,
    "crossover": _run_crossover,
    "sweep": _run_sweep,
    "survey": _run_survey,
    "simulate": _run_simulate,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    buf = io.StringIO()
    try:
        result = _COMMANDS[args.command](args, buf)
    except (UnattainableError, NoBracketError) as exc:
        print(f"rftlattice: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (DomainError, MalformedHeaderError, OSError) as exc:
        print(f"rftlattice: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if args.json_path:
        with open(args.json_path, "w") as fh:
            json.dump(result, fh, indent=2, default=list)
            fh.write("\n")
    return EXIT_OK


def main() -> None:
    sys.exit(run())
