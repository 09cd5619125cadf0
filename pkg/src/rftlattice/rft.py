"""
Euler characteristic densities of Student t and Gaussian random fields,
resel counts, and the height threshold at which the expected Euler
characteristic equals a target family-wise error rate.

EC densities follow Worsley et al. (1996) for three-dimensional fields with
Gaussian autocorrelation; smoothness enters only through the resel counts.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import DomainError, NoBracketError, UnattainableError
from .stats import normal_tail, t_tail

__all__ = [
    "FieldSpec",
    "LatticeSpec",
    "ReselVector",
    "resel_count_simplified",
    "resel_count_cuboid",
    "ec_density",
    "expected_ec",
    "rft_threshold",
    "T_MAX",
]

FOUR_LN2 = 4.0 * math.log(2.0)
T_MAX = 100.0
_EC_TOL = 1e-10

Triple = Tuple[float, float, float]


@dataclass(frozen=True)
class FieldSpec:
    """Statistical field family: ``"t"`` with ``nu`` degrees of freedom, or ``"gaussian"``."""

    family: str = "t"
    nu: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("t", "gaussian"):
            raise DomainError(f"unknown field family {self.family!r}")
        if self.family == "t":
            if self.nu is None or not self.nu > 1:
                raise DomainError(f"a t field needs nu > 1, got {self.nu!r}")
        elif self.nu is not None:
            raise DomainError("a Gaussian field takes no degrees of freedom")

    @classmethod
    def student_t(cls, nu: float) -> "FieldSpec":
        return cls("t", float(nu))

    @classmethod
    def gaussian(cls) -> "FieldSpec":
        return cls("gaussian", None)

    @property
    def is_gaussian(self) -> bool:
        return self.family == "gaussian"

    def tail(self, t: float) -> float:
        """Marginal upper tail probability at height ``t``."""
        return normal_tail(t) if self.is_gaussian else t_tail(t, self.nu)

    def __str__(self):
        return "gaussian" if self.is_gaussian else f"t({self.nu:g})"


def _positive_triple(name: str, values: Sequence[float]) -> Triple:
    if len(values) != 3:
        raise DomainError(f"{name} needs three components, got {len(values)}")
    out = tuple(float(v) for v in values)
    if not all(v > 0 and math.isfinite(v) for v in out):
        raise DomainError(f"{name} components must be positive and finite, got {out}")
    return out


@dataclass(frozen=True)
class LatticeSpec:
    """
    Sampling lattice and field smoothness.

    Parameters
    ----------
    voxel_mm : triple of float
        Voxel edge lengths.
    fwhm_mm : triple of float
        Smoothness of the field along each axis, as a Gaussian FWHM.
    volume_mm3 : float
        Search volume. Defaults to a 1.4 litre brain.
    """

    voxel_mm: Triple
    fwhm_mm: Triple
    volume_mm3: float = 1.4e6

    def __post_init__(self):
        object.__setattr__(self, "voxel_mm", _positive_triple("voxel_mm", self.voxel_mm))
        object.__setattr__(self, "fwhm_mm", _positive_triple("fwhm_mm", self.fwhm_mm))
        if not (self.volume_mm3 > 0 and math.isfinite(self.volume_mm3)):
            raise DomainError(f"volume must be positive, got {self.volume_mm3!r}")

    @classmethod
    def isotropic(cls, voxel_mm: float, fwhm_mm: float, volume_mm3: float = 1.4e6) -> "LatticeSpec":
        return cls((voxel_mm,) * 3, (fwhm_mm,) * 3, volume_mm3)

    @property
    def smoothness_ratio(self) -> Triple:
        """Per-axis FWHM in voxel units."""
        return tuple(f / v for f, v in zip(self.fwhm_mm, self.voxel_mm))

    def in_voxel_units(self) -> "LatticeSpec":
        """The same lattice with lengths measured in voxels."""
        voxel_volume = math.prod(self.voxel_mm)
        return LatticeSpec((1.0, 1.0, 1.0), self.smoothness_ratio, self.volume_mm3 / voxel_volume)


@dataclass(frozen=True)
class ReselVector:
    """Resel counts of dimension 0 through 3."""

    r0: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    r3: float = 0.0

    def __post_init__(self):
        if any(not (r >= 0 and math.isfinite(r)) for r in self.as_tuple()):
            raise DomainError(f"resel counts must be finite and nonnegative, got {self.as_tuple()}")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.r0, self.r1, self.r2, self.r3)

    def scaled(self, factor: float) -> "ReselVector":
        return ReselVector(*(factor * r for r in self.as_tuple()))


def resel_count_simplified(spec: LatticeSpec) -> ReselVector:
    """
    Resel count as search volume over the product of the FWHMs.

    Only the 3-dimensional count is nonzero, which is a reasonable
    approximation for a large unmasked volume. Volume and FWHM may be given
    in any common length unit.
    """
    return ReselVector(r3=spec.volume_mm3 / math.prod(spec.fwhm_mm))


def resel_count_cuboid(extent_resels: Sequence[float]) -> ReselVector:
    """Full resel vector of an ``a x b x c`` box whose edges are measured in resels."""
    a, b, c = _positive_triple("extent_resels", extent_resels)
    return ReselVector(1.0, a + b + c, a * b + b * c + c * a, a * b * c)


def _power_term(t: float, field: FieldSpec) -> float:
    # (1 + t^2/nu)^(-(nu-1)/2), or exp(-t^2/2) in the Gaussian limit.
    if field.is_gaussian:
        return math.exp(-0.5 * t * t)
    nu = field.nu
    return math.exp(-0.5 * (nu - 1.0) * math.log1p(t * t / nu))


def _t_gamma_factor(nu: float) -> float:
    # Gamma((nu+1)/2) / (sqrt(nu/2) Gamma(nu/2)); tends to 1 as nu grows.
    return math.exp(math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(0.5 * nu))


def ec_density(d: int, t: float, field: FieldSpec) -> float:
    """
    Euler characteristic density of dimension ``d`` at height ``t``.

    Units are per d-dimensional resel. ``ec_density(0, t, f)`` is the
    marginal tail probability.
    """
    if d == 0:
        return field.tail(t)
    if d not in (1, 2, 3):
        raise DomainError(f"EC density dimension must be 0..3, got {d!r}")
    power = _power_term(t, field)
    if d == 1:
        return math.sqrt(FOUR_LN2) / (2.0 * math.pi) * power
    if d == 2:
        gamma = 1.0 if field.is_gaussian else _t_gamma_factor(field.nu)
        return FOUR_LN2 / (2.0 * math.pi) ** 1.5 * gamma * t * power
    shape = t * t - 1.0 if field.is_gaussian else (field.nu - 1.0) * t * t / field.nu - 1.0
    return FOUR_LN2 ** 1.5 / (2.0 * math.pi) ** 2 * power * shape


def expected_ec(t: float, resels: ReselVector, field: FieldSpec) -> float:
    """Expected Euler characteristic of the excursion set above ``t``."""
    total = 0.0
    for d, r in enumerate(resels.as_tuple()):
        if r:
            total += r * ec_density(d, t, field)
    return total


def _peak(resels: ReselVector, field: FieldSpec) -> float:
    # Coarse scan for the maximum of E[EC] over t >= 0, then golden-section
    # refinement inside the neighbouring grid cells.
    grid = [0.1 * i for i in range(201)]
    values = [expected_ec(t, resels, field) for t in grid]
    i = max(range(len(values)), key=values.__getitem__)
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = expected_ec(c, resels, field), expected_ec(d, resels, field)
    while b - a > 1e-10:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = expected_ec(c, resels, field)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = expected_ec(d, resels, field)
    candidates = [lo, hi, 0.5 * (a + b)]
    return max(candidates, key=lambda t: expected_ec(t, resels, field))


def rft_threshold(alpha: float, resels: ReselVector, field: FieldSpec, t_max: float = T_MAX) -> float:
    """
    Height threshold ``t`` with ``expected_ec(t) == alpha``.

    The root is taken on the decreasing branch of the expected EC, above its
    maximum over ``t >= 0``, and refined by bisection.

    Raises
    ------
    UnattainableError
        If the expected EC never reaches ``alpha``.
    NoBracketError
        If the root lies above ``t_max``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    lo = _peak(resels, field)
    e_lo = expected_ec(lo, resels, field)
    if e_lo < alpha:
        raise UnattainableError(
            f"maximum expected EC {e_lo:.6g} is below alpha={alpha:g} for resels {resels.as_tuple()}"
        )
    hi = t_max
    if expected_ec(hi, resels, field) > alpha:
        raise NoBracketError(f"threshold exceeds t_max={t_max:g}")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        e = expected_ec(mid, resels, field)
        if e > alpha:
            lo = mid
        else:
            hi = mid
        if abs(e - alpha) <= _EC_TOL and hi - lo < 1e-12:
            break
    e_lo, e_hi = expected_ec(lo, resels, field), expected_ec(hi, resels, field)
    return lo if abs(e_lo - alpha) < abs(e_hi - alpha) else hi
