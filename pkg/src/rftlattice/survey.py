"""
Study-metadata tables and the normal model of applied smoothness.

A survey table lists, per published study, voxel dimensions, the FWHM of
the applied smoothing kernel and the multiple-comparison method. From it we
fit a normal distribution to FWHM / voxel size, scale that distribution by
quantiles of the residual-to-applied smoothness ratio, and read off the
fraction of studies that fall short of a critical smoothness.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, List, Sequence, TextIO, Tuple

import numpy as np

from .errors import DomainError
from .stats import WelchResult, normal_cdf, normal_quantile, welch_t_test

__all__ = [
    "CORRECTION_METHODS",
    "SURVEY_HEADER",
    "StudyRecord",
    "BadRow",
    "IngestReport",
    "MalformedHeaderError",
    "RatioModel",
    "ResidualQuantiles",
    "RftUserComparison",
    "SurveySummary",
    "ingest",
    "write_survey_csv",
    "smoothness_ratio",
    "fit_ratio_model",
    "prob_meets_assumption",
    "adjust_model",
    "fail_percentage",
    "compare_rft_users",
    "summarize",
    "synthetic_survey",
    "load_synthetic_survey",
    "PUBLISHED_RATIO_MODEL",
    "CENTENO_QUANTILES",
]

CORRECTION_METHODS = (
    "corrected_parametric",
    "uncorrected_parametric",
    "simulation",
    "machine_learning",
    "fdr",
    "tfce",
    "permutation",
    "mixture_model",
    "bonferroni",
    "not_reported",
)

SURVEY_HEADER = (
    "study_id",
    "voxel_x_mm",
    "voxel_y_mm",
    "voxel_z_mm",
    "applied_fwhm_mm",
    "software",
    "correction_method",
    "uses_rft",
)

RATIO_MODES = ("in_plane", "geometric_mean")


class MalformedHeaderError(ValueError):
    """The first row of a survey table does not match :data:`SURVEY_HEADER`."""


@dataclass(frozen=True)
class StudyRecord:
    study_id: str
    voxel_x_mm: float
    voxel_y_mm: float
    voxel_z_mm: float
    applied_fwhm_mm: float
    software: str
    correction_method: str
    uses_rft: bool

    def __post_init__(self):
        if not all(v > 0 and math.isfinite(v) for v in (self.voxel_x_mm, self.voxel_y_mm, self.voxel_z_mm)):
            raise DomainError("voxel dimensions must be positive")
        if not (self.applied_fwhm_mm >= 0 and math.isfinite(self.applied_fwhm_mm)):
            raise DomainError("applied FWHM must be nonnegative")
        if self.correction_method not in CORRECTION_METHODS:
            raise DomainError(f"unknown correction method {self.correction_method!r}")
        if self.uses_rft != (self.correction_method == "corrected_parametric"):
            raise DomainError("uses_rft must be true exactly for corrected_parametric studies")

    @property
    def voxel_mm(self) -> Tuple[float, float, float]:
        return (self.voxel_x_mm, self.voxel_y_mm, self.voxel_z_mm)


@dataclass(frozen=True)
class BadRow:
    line: int
    reason: str


@dataclass
class IngestReport:
    records: List[StudyRecord] = field(default_factory=list)
    rejects: List[BadRow] = field(default_factory=list)


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise DomainError(f"expected true/false, got {text!r}")


def _parse_row(row: Sequence[str]) -> StudyRecord:
    if len(row) != len(SURVEY_HEADER):
        raise DomainError(f"expected {len(SURVEY_HEADER)} fields, got {len(row)}")
    sid, vx, vy, vz, fwhm, software, method, uses_rft = row
    try:
        numbers = [float(v) for v in (vx, vy, vz, fwhm)]
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    return StudyRecord(sid, *numbers, software, method, _parse_bool(uses_rft))


def ingest(stream: TextIO) -> IngestReport:
    """
    Read a survey CSV.

    Rows that fail validation are reported in ``rejects`` with their
    1-based line number in the file (the header is line 1).

    Raises
    ------
    MalformedHeaderError
        If the header row is missing or differs from :data:`SURVEY_HEADER`.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SURVEY_HEADER:
        raise MalformedHeaderError(f"expected header {','.join(SURVEY_HEADER)}, got {header!r}")
    report = IngestReport()
    for row in reader:
        if not row:
            continue
        try:
            report.records.append(_parse_row(row))
        except DomainError as exc:
            report.rejects.append(BadRow(reader.line_num, str(exc)))
    return report


def write_survey_csv(records: Iterable[StudyRecord], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SURVEY_HEADER)
    for r in records:
        writer.writerow(
            (
                r.study_id,
                repr(r.voxel_x_mm),
                repr(r.voxel_y_mm),
                repr(r.voxel_z_mm),
                repr(r.applied_fwhm_mm),
                r.software,
                r.correction_method,
                "true" if r.uses_rft else "false",
            )
        )


def smoothness_ratio(record: StudyRecord, mode: str = "in_plane") -> float:
    """
    Applied FWHM in voxel units.

    ``in_plane`` divides by the x voxel size; ``geometric_mean`` divides by
    the cube root of the voxel volume.
    """
    if record.applied_fwhm_mm <= 0:
        raise DomainError(f"study {record.study_id!r} applied no smoothing")
    if mode == "in_plane":
        return record.applied_fwhm_mm / record.voxel_x_mm
    if mode == "geometric_mean":
        return record.applied_fwhm_mm / math.prod(record.voxel_mm) ** (1.0 / 3.0)
    raise DomainError(f"unknown ratio mode {mode!r}; expected one of {RATIO_MODES}")


@dataclass(frozen=True)
class RatioModel:
    """Normal distribution of smoothness ratios (in voxels)."""

    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise DomainError(f"sd must be positive, got {self.sd!r}")


@dataclass(frozen=True)
class ResidualQuantiles:
    """Quantiles of residual smoothness relative to the applied kernel."""

    q05: float = 1.26
    q50: float = 1.36
    q95: float = 1.77

    def __post_init__(self):
        if not 0 < self.q05 <= self.q50 <= self.q95:
            raise DomainError(f"need 0 < q05 <= q50 <= q95, got {(self.q05, self.q50, self.q95)}")


PUBLISHED_RATIO_MODEL = RatioModel(1.99, 0.64)
CENTENO_QUANTILES = ResidualQuantiles(1.26, 1.36, 1.77)


def fit_ratio_model(ratios: Sequence[float]) -> RatioModel:
    """Maximum-likelihood normal fit (variance divides by n)."""
    x = np.asarray(ratios, dtype=float)
    if x.size < 2:
        raise DomainError("need at least 2 ratios to fit")
    sd = float(x.std())
    if sd == 0.0:
        raise DomainError("ratios have zero variance")
    return RatioModel(float(x.mean()), sd)


def prob_meets_assumption(model: RatioModel, critical_ratio: float) -> float:
    """Probability that a study's smoothness ratio exceeds ``critical_ratio``."""
    return 1.0 - normal_cdf((critical_ratio - model.mean) / model.sd)


def adjust_model(model: RatioModel, multiplier: float) -> RatioModel:
    """Scale a normal ratio model by a residual-smoothness multiplier."""
    if not multiplier > 0:
        raise DomainError(f"multiplier must be positive, got {multiplier!r}")
    return RatioModel(model.mean * multiplier, model.sd * multiplier)


def fail_percentage(
    model: RatioModel, quantiles: ResidualQuantiles, critical_ratio: float
) -> Tuple[float, float, float]:
    """
    Percent of studies below ``critical_ratio`` after residual adjustment.

    Returns ``(low, median, high)``: the largest multiplier gives the lowest
    failure rate.
    """
    def pct(q):
        m = adjust_model(model, q)
        return 100.0 * normal_cdf((critical_ratio - m.mean) / m.sd)

    return pct(quantiles.q95), pct(quantiles.q50), pct(quantiles.q05)


@dataclass(frozen=True)
class RftUserComparison:
    mean_rft: float
    mean_other: float
    n_rft: int
    n_other: int
    welch: WelchResult


def _ratios(records: Iterable[StudyRecord], mode: str) -> List[float]:
    return [smoothness_ratio(r, mode) for r in records if r.applied_fwhm_mm > 0]


def compare_rft_users(records: Sequence[StudyRecord], mode: str = "in_plane") -> RftUserComparison:
    """Welch test of smoothness ratios, RFT users against everyone else."""
    rft = _ratios((r for r in records if r.uses_rft), mode)
    other = _ratios((r for r in records if not r.uses_rft), mode)
    if len(rft) < 2 or len(other) < 2:
        raise DomainError("each group needs at least 2 smoothed studies")
    return RftUserComparison(
        mean_rft=math.fsum(rft) / len(rft),
        mean_other=math.fsum(other) / len(other),
        n_rft=len(rft),
        n_other=len(other),
        welch=welch_t_test(rft, other),
    )


@dataclass(frozen=True)
class SurveySummary:
    n_studies: int
    n_unsmoothed: int
    n_rejected: int
    model: RatioModel
    critical_ratio: float
    prob_meets: float
    fail_low: float
    fail_median: float
    fail_high: float
    comparison: RftUserComparison = None

    def as_rows(self) -> List[Tuple[str, str]]:
        rows = [
            ("n_studies", str(self.n_studies)),
            ("n_unsmoothed", str(self.n_unsmoothed)),
            ("n_rejected", str(self.n_rejected)),
            ("ratio_mean", f"{self.model.mean:.6g}"),
            ("ratio_sd", f"{self.model.sd:.6g}"),
            ("critical_ratio", f"{self.critical_ratio:.6g}"),
            ("prob_meets_assumption", f"{self.prob_meets:.6g}"),
            ("fail_pct_low", f"{self.fail_low:.6g}"),
            ("fail_pct_median", f"{self.fail_median:.6g}"),
            ("fail_pct_high", f"{self.fail_high:.6g}"),
        ]
        c = self.comparison
        if c is not None:
            rows += [
                ("mean_ratio_rft", f"{c.mean_rft:.6g}"),
                ("mean_ratio_other", f"{c.mean_other:.6g}"),
                ("welch_t", f"{c.welch.t:.6g}"),
                ("welch_df", f"{c.welch.df:.6g}"),
                ("welch_p", f"{c.welch.p_two_sided:.6g}"),
                ("welch_r", f"{c.welch.effect_r:.6g}"),
            ]
        return rows

    def to_text(self) -> str:
        c = self.comparison
        lines = [
            f"studies: {self.n_studies} ({self.n_unsmoothed} unsmoothed, {self.n_rejected} rejected rows)",
            f"FWHM/voxel ~ Normal(mean={self.model.mean:.4f}, sd={self.model.sd:.4f})",
            f"P(ratio > {self.critical_ratio:g}) = {self.prob_meets:.4f}",
            "studies failing after residual adjustment: "
            f"{self.fail_median:.1f}% (bounds {self.fail_low:.1f}% to {self.fail_high:.1f}%)",
        ]
        if c is not None:
            lines.append(
                f"RFT users {c.mean_rft:.3f} (n={c.n_rft}) vs others {c.mean_other:.3f} (n={c.n_other}): "
                f"t({c.welch.df:.2f}) = {c.welch.t:.4f}, p = {c.welch.p_two_sided:.4f}, r = {c.welch.effect_r:.3f}"
            )
        return "\n".join(lines) + "\n"


def summarize(
    report: IngestReport,
    critical_ratio: float = 3.5,
    quantiles: ResidualQuantiles = CENTENO_QUANTILES,
    mode: str = "in_plane",
) -> SurveySummary:
    """Fit, probability, adjusted failure bounds and RFT-user comparison for a table."""
    records = report.records
    smoothed = [r for r in records if r.applied_fwhm_mm > 0]
    model = fit_ratio_model(_ratios(smoothed, mode))
    low, med, high = fail_percentage(model, quantiles, critical_ratio)
    try:
        comparison = compare_rft_users(smoothed, mode)
    except DomainError:
        comparison = None
    return SurveySummary(
        n_studies=len(records),
        n_unsmoothed=len(records) - len(smoothed),
        n_rejected=len(report.rejects),
        model=model,
        critical_ratio=critical_ratio,
        prob_meets=prob_meets_assumption(model, critical_ratio),
        fail_low=low,
        fail_median=med,
        fail_high=high,
        comparison=comparison,
    )


# Method tallies of the non-RFT group in the 137-study survey.
_OTHER_METHODS = (
    ("uncorrected_parametric", 24),
    ("simulation", 17),
    ("machine_learning", 8),
    ("fdr", 6),
    ("tfce", 3),
    ("permutation", 1),
    ("mixture_model", 1),
    ("bonferroni", 1),
    ("not_reported", 8),
)


def _standardized_scores(n: int) -> np.ndarray:
    # Normal scores at (i - 0.5)/n, rescaled to exact mean 0 and sample sd 1.
    z = np.array([normal_quantile((i + 0.5) / n) for i in range(n)])
    z = z - z.mean()
    return z / z.std(ddof=1)


def _interleave(values: np.ndarray, stride: int) -> np.ndarray:
    # Deterministic shuffle so neighbouring rows are not sorted.
    n = len(values)
    order = sorted(range(n), key=lambda i: (i * stride) % n)
    return values[order]


def synthetic_survey(
    n_rft: int = 68,
    n_other: int = 69,
    mean_rft: float = 2.05,
    mean_other: float = 1.94,
    sd: float = 0.64,
) -> List[StudyRecord]:
    """
    A deterministic stand-in for the 137-study survey.

    Smoothness ratios in each group have exactly the requested sample mean
    and sample sd (up to 4-decimal rounding of the FWHM); in-plane voxel
    sizes have mean about 3.01 mm and slice thickness about 3.53 mm.
    """
    records = []
    groups = [("corrected_parametric", n_rft, mean_rft)]
    groups.append((None, n_other, mean_other))
    other_methods = [m for m, k in _OTHER_METHODS for _ in range(k)]
    if len(other_methods) < n_other:
        other_methods += ["not_reported"] * (n_other - len(other_methods))
    idx = 0
    for method, n, mean in groups:
        ratios = _interleave(mean + sd * _standardized_scores(n), 7)
        vx = _interleave(3.01 + 0.62 * _standardized_scores(n), 11)
        vz = _interleave(3.53 + 0.80 * _standardized_scores(n), 13)
        for j in range(n):
            idx += 1
            m = method or other_methods[j]
            voxel_x = round(max(float(vx[j]), 1.0), 2)
            records.append(
                StudyRecord(
                    study_id=f"S{idx:03d}",
                    voxel_x_mm=voxel_x,
                    voxel_y_mm=voxel_x,
                    voxel_z_mm=round(max(float(vz[j]), 1.0), 2),
                    applied_fwhm_mm=round(float(ratios[j]) * voxel_x, 4),
                    software="SPM" if idx % 3 else "FSL",
                    correction_method=m,
                    uses_rft=m == "corrected_parametric",
                )
            )
    return records


def load_synthetic_survey() -> IngestReport:
    """The shipped synthetic survey table."""
    text = resources.files("rftlattice").joinpath("data/synthetic_survey.csv").read_text()
    return ingest(io.StringIO(text))
