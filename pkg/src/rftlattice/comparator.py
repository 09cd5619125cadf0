"""
Bonferroni thresholds, the RFT-versus-Bonferroni comparison on a lattice,
the critical smoothness at which the two coincide, and grid sweeps over
voxel size, degrees of freedom and smoothness.

Below the critical smoothness the RFT threshold is higher (more
conservative) than Bonferroni, which is taken as the sign that the lattice
is too coarse for RFT to be accurate.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO, Union

from .errors import DomainError, NoBracketError, UnattainableError
from .rft import (
    FieldSpec,
    LatticeSpec,
    ReselVector,
    resel_count_cuboid,
    resel_count_simplified,
    rft_threshold,
)
from .stats import normal_quantile, t_quantile

__all__ = [
    "BRAIN_VOLUME_MM3",
    "BELOW_RANGE",
    "ABOVE_RANGE",
    "ThresholdPair",
    "SweepCell",
    "voxel_count",
    "lattice_resels",
    "bonferroni_threshold",
    "threshold_pair",
    "crossover_smoothness",
    "sweep",
    "write_sweep_csv",
    "SWEEP_HEADER",
]

BRAIN_VOLUME_MM3 = 1.4e6
RATIO_RANGE = (1.0, 6.0)
BELOW_RANGE = "below_range"
ABOVE_RANGE = "above_range"
_CROSSOVER_TOL = 1e-8

SWEEP_HEADER = ("voxel_mm", "df", "smoothness_ratio", "t_rft", "t_bonferroni", "rft_valid")


@dataclass(frozen=True)
class ThresholdPair:
    t_rft: float
    t_bonferroni: float

    @property
    def rft_valid(self) -> bool:
        """True when RFT is no more conservative than Bonferroni."""
        return self.t_rft <= self.t_bonferroni


@dataclass(frozen=True)
class SweepCell:
    voxel_mm: float
    nu: float
    smoothness_ratio: float
    pair: Optional[ThresholdPair]
    t_bonferroni: float
    error: Optional[str] = None

    @property
    def rft_valid(self) -> bool:
        return self.pair is not None and self.pair.rft_valid


def voxel_count(volume_mm3: float, voxel_mm: Sequence[float]) -> int:
    """Number of whole voxels that fit in ``volume_mm3``."""
    if not volume_mm3 > 0 or any(not v > 0 for v in voxel_mm):
        raise DomainError("volume and voxel dimensions must be positive")
    n = math.floor(volume_mm3 / math.prod(voxel_mm))
    if n < 1:
        raise DomainError(f"no voxel of size {tuple(voxel_mm)} fits in {volume_mm3:g} mm^3")
    return n


def lattice_resels(spec: LatticeSpec, method: str = "simplified") -> ReselVector:
    """
    Resel vector of the search volume.

    ``"simplified"`` keeps only the volume term. ``"cuboid"`` treats the
    volume as a cube and includes its faces, edges and corners, which makes
    RFT slightly more conservative.
    """
    if method == "simplified":
        return resel_count_simplified(spec)
    if method == "cuboid":
        side = spec.volume_mm3 ** (1.0 / 3.0)
        return resel_count_cuboid([side / f for f in spec.fwhm_mm])
    raise DomainError(f"unknown resel method {method!r}")


def bonferroni_threshold(alpha: float, n_tests: int, field: FieldSpec) -> float:
    """Height threshold giving per-test tail probability ``alpha / n_tests``."""
    if n_tests < 1:
        raise DomainError(f"n_tests must be >= 1, got {n_tests!r}")
    p = alpha / n_tests
    if field.is_gaussian:
        return -normal_quantile(p)
    return t_quantile(p, field.nu)


def threshold_pair(
    spec: LatticeSpec, field: FieldSpec, alpha: float = 0.05, resels: str = "simplified"
) -> ThresholdPair:
    """RFT and Bonferroni thresholds for one lattice."""
    n = voxel_count(spec.volume_mm3, spec.voxel_mm)
    return ThresholdPair(
        t_rft=rft_threshold(alpha, lattice_resels(spec, resels), field),
        t_bonferroni=bonferroni_threshold(alpha, n, field),
    )


def _isotropic(voxel_mm: float, ratio: float, volume_mm3: float) -> LatticeSpec:
    return LatticeSpec.isotropic(voxel_mm, ratio * voxel_mm, volume_mm3)


def crossover_smoothness(
    voxel_mm: float,
    nu: Optional[float],
    alpha: float = 0.05,
    volume_mm3: float = BRAIN_VOLUME_MM3,
    resels: str = "simplified",
    ratio_range: Sequence[float] = RATIO_RANGE,
) -> Union[float, str]:
    """
    Smoothness ratio (FWHM / voxel size) at which RFT and Bonferroni agree.

    Voxels and smoothness are isotropic. ``nu=None`` selects a Gaussian
    field. Returns :data:`BELOW_RANGE` if RFT is already valid at the low
    end of ``ratio_range`` and :data:`ABOVE_RANGE` if it is still more
    conservative at the high end.
    """
    field = FieldSpec.gaussian() if nu is None else FieldSpec.student_t(nu)
    t_bonf = bonferroni_threshold(alpha, voxel_count(volume_mm3, (voxel_mm,) * 3), field)

    def gap(ratio: float) -> float:
        spec = _isotropic(voxel_mm, ratio, volume_mm3)
        return rft_threshold(alpha, lattice_resels(spec, resels), field) - t_bonf

    lo, hi = float(ratio_range[0]), float(ratio_range[1])
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo <= 0.0:
        return BELOW_RANGE
    if g_hi > 0.0:
        return ABOVE_RANGE
    while True:
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if abs(g) <= _CROSSOVER_TOL or not lo < mid < hi:
            return mid
        if g > 0.0:
            lo = mid
        else:
            hi = mid


def _cell(args) -> SweepCell:
    voxel_mm, nu, ratio, alpha, volume_mm3, resels = args
    field = FieldSpec.student_t(nu)
    spec = _isotropic(voxel_mm, ratio, volume_mm3)
    t_bonf = bonferroni_threshold(alpha, voxel_count(volume_mm3, spec.voxel_mm), field)
    try:
        t_rft = rft_threshold(alpha, lattice_resels(spec, resels), field)
    except UnattainableError:
        return SweepCell(voxel_mm, nu, ratio, None, t_bonf, "unattainable")
    except NoBracketError:
        return SweepCell(voxel_mm, nu, ratio, None, t_bonf, "no_bracket")
    return SweepCell(voxel_mm, nu, ratio, ThresholdPair(t_rft, t_bonf), t_bonf)


def sweep(
    voxel_sizes: Iterable[float],
    nu_values: Iterable[float],
    ratios: Iterable[float],
    alpha: float = 0.05,
    volume_mm3: float = BRAIN_VOLUME_MM3,
    resels: str = "simplified",
    workers: int = 1,
) -> List[SweepCell]:
    """
    Threshold pairs over every (voxel size, nu, smoothness ratio) combination.

    Rows are ordered by voxel size, then nu, then ratio, each ascending.
    Cells whose RFT threshold cannot be found carry ``error`` instead of
    aborting the sweep. With ``workers > 1`` cells are computed in separate
    processes; the output order and values are unchanged.
    """
    jobs = [
        (float(v), float(nu), float(r), alpha, volume_mm3, resels)
        for v in sorted(voxel_sizes)
        for nu in sorted(nu_values)
        for r in sorted(ratios)
    ]
    if not jobs:
        raise DomainError("sweep ranges must be nonempty")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cell, jobs, chunksize=64))
    return [_cell(job) for job in jobs]


def fmt6(x: float) -> str:
    """Six significant digits, the CSV number format."""
    return f"{x:.6g}"


def write_sweep_csv(cells: Iterable[SweepCell], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for c in cells:
        t_rft = c.error if c.pair is None else fmt6(c.pair.t_rft)
        writer.writerow(
            (
                fmt6(c.voxel_mm),
                fmt6(c.nu),
                fmt6(c.smoothness_ratio),
                t_rft,
                fmt6(c.t_bonferroni),
                "true" if c.rft_valid else "false",
            )
        )
