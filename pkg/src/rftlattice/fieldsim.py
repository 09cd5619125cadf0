"""
Monte Carlo lattice random fields.

Smooth Gaussian fields are white noise convolved with a separable, truncated
Gaussian kernel scaled to unit L2 norm, so each voxel has unit variance.
Noise is drawn on a lattice padded by the kernel radius and cropped after
smoothing, which removes edge effects without wrapping.

Random streams
--------------
Every field is drawn from ``numpy.random.default_rng(SeedSequence(key))``
(PCG64) where ``key`` is a tuple of nonnegative integers. In
:func:`empirical_fwe`, realization ``i`` of a run with master seed ``s``
uses key ``(s, i)`` for a Gaussian field, and component ``j`` of a t-field
uses key ``(s, i, j)``.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DomainError
from .rft import FieldSpec

__all__ = [
    "SimConfig",
    "FweEstimate",
    "FieldTooLargeError",
    "fwhm_to_sigma",
    "gaussian_kernel",
    "generate_smooth_field",
    "generate_t_field",
    "one_sample_t",
    "estimate_fwhm",
    "wilson_interval",
    "realization_maxima",
    "fwe_from_maxima",
    "empirical_fwe",
    "SIM_REPORT_HEADER",
]

SeedKey = Union[int, Sequence[int]]
DEFAULT_MAX_BYTES = 1 << 30
_Z95 = 1.959963984540054

SIM_REPORT_HEADER = (
    "trials", "rejections", "rate", "ci_low", "ci_high", "threshold",
    "dims", "fwhm_vox", "family", "nu", "master_seed",
)


class FieldTooLargeError(MemoryError):
    """The padded lattice would exceed the configured memory budget."""


def fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / math.sqrt(8.0 * math.log(2.0))


def _rng(seed: SeedKey) -> np.random.Generator:
    key = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.default_rng(np.random.SeedSequence(key))


def gaussian_kernel(fwhm: float) -> np.ndarray:
    """Sampled Gaussian truncated at ``ceil(3 sigma)`` with unit L2 norm."""
    sigma = fwhm_to_sigma(fwhm)
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / np.sqrt(np.sum(k * k))


def _check_dims(dims: Sequence[int]) -> Tuple[int, int, int]:
    if len(dims) != 3 or any(int(d) != d or d < 1 for d in dims):
        raise DomainError(f"dims must be three positive integers, got {tuple(dims)}")
    return tuple(int(d) for d in dims)


def _check_fwhm(fwhm_vox) -> Tuple[float, float, float]:
    f = (float(fwhm_vox),) * 3 if np.isscalar(fwhm_vox) else tuple(float(v) for v in fwhm_vox)
    if len(f) != 3 or any(not (v >= 0 and math.isfinite(v)) for v in f):
        raise DomainError(f"fwhm_vox must be three nonnegative numbers, got {f}")
    return f


def _smooth_noise(rng, dims, fwhm, max_bytes):
    kernels = [gaussian_kernel(f) if f > 0 else None for f in fwhm]
    pads = [0 if k is None else (len(k) - 1) // 2 for k in kernels]
    shape = tuple(d + 2 * p for d, p in zip(dims, pads))
    if 8 * math.prod(shape) > max_bytes:
        raise FieldTooLargeError(f"padded lattice {shape} exceeds {max_bytes} bytes")
    field = rng.standard_normal(shape)
    for axis, k in enumerate(kernels):
        if k is not None:
            field = convolve1d(field, k, axis=axis, mode="constant")
    crop = tuple(slice(p, p + d) for p, d in zip(pads, dims))
    return field[crop]


def generate_smooth_field(
    dims: Sequence[int], fwhm_vox, seed: SeedKey, max_bytes: int = DEFAULT_MAX_BYTES
) -> np.ndarray:
    """
    Unit-variance stationary Gaussian field on a ``dims`` lattice.

    Parameters
    ----------
    dims : triple of int
    fwhm_vox : float or triple of float
        Kernel FWHM per axis in voxels; 0 leaves that axis unsmoothed.
    seed : int or sequence of int
        Seed-sequence key for the noise stream.
    max_bytes : int
        Memory budget for the padded noise array.
    """
    dims = _check_dims(dims)
    fwhm = _check_fwhm(fwhm_vox)
    if any(f > 0 for f in fwhm) and min(dims) < 8:
        raise DomainError("smoothed fields need at least 8 voxels per axis")
    return _smooth_noise(_rng(seed), dims, fwhm, max_bytes)


def one_sample_t(fields: np.ndarray) -> np.ndarray:
    """Voxelwise one-sample t statistic over the first axis of ``fields``."""
    n = fields.shape[0]
    mean = fields.mean(axis=0)
    sd = fields.std(axis=0, ddof=1)
    return mean / (sd / math.sqrt(n))


def generate_t_field(
    dims: Sequence[int], fwhm_vox, nu: int, seed: SeedKey, max_bytes: int = DEFAULT_MAX_BYTES
) -> np.ndarray:
    """
    Smooth t-field with ``nu`` degrees of freedom.

    Built as the one-sample t statistic of ``nu + 1`` independent smooth
    Gaussian fields; component ``j`` uses seed key ``(*seed, j)``.
    """
    if int(nu) != nu or nu < 2:
        raise DomainError(f"t-field construction needs integer nu >= 2, got {nu!r}")
    base = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    comps = np.stack(
        [generate_smooth_field(dims, fwhm_vox, (*base, j), max_bytes) for j in range(int(nu) + 1)]
    )
    return one_sample_t(comps)


def estimate_fwhm(field: np.ndarray, axis: int) -> float:
    """
    Smoothness along ``axis`` from the variance of forward differences.

    Assumes a unit-variance field with Gaussian autocorrelation:
    ``FWHM = sqrt(4 ln 2 / var(diff))``.
    """
    if field.shape[axis] < 2:
        raise DomainError("need at least 2 voxels along the axis")
    v = float(np.var(np.diff(field, axis=axis)))
    if v == 0.0:
        raise DomainError("forward differences have zero variance")
    return math.sqrt(4.0 * math.log(2.0) / v)


@dataclass(frozen=True)
class SimConfig:
    dims: Tuple[int, int, int]
    fwhm_vox: Tuple[float, float, float]
    field: FieldSpec
    n_realizations: int
    master_seed: int = 0
    max_bytes: int = DEFAULT_MAX_BYTES

    def __post_init__(self):
        object.__setattr__(self, "dims", _check_dims(self.dims))
        object.__setattr__(self, "fwhm_vox", _check_fwhm(self.fwhm_vox))
        if self.n_realizations < 1:
            raise DomainError("n_realizations must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if any(f > 0 for f in self.fwhm_vox) and min(self.dims) < 8:
            raise DomainError("smoothed fields need at least 8 voxels per axis")
        if not self.field.is_gaussian and (int(self.field.nu) != self.field.nu or self.field.nu < 2):
            raise DomainError("simulated t-fields need integer nu >= 2")

    @property
    def n_voxels(self) -> int:
        return math.prod(self.dims)

    def realization(self, i: int) -> np.ndarray:
        if self.field.is_gaussian:
            return generate_smooth_field(self.dims, self.fwhm_vox, (self.master_seed, i), self.max_bytes)
        return generate_t_field(self.dims, self.fwhm_vox, int(self.field.nu), (self.master_seed, i), self.max_bytes)


@dataclass(frozen=True)
class FweEstimate:
    rejections: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def wilson_interval(k: int, n: int, z: float = _Z95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion ``k / n``."""
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # exact endpoints at k = 0 and k = n; the formula leaves rounding residue
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def realization_maxima(config: SimConfig) -> np.ndarray:
    """Maximum voxel value of each realization, in realization order."""
    return np.array([float(config.realization(i).max()) for i in range(config.n_realizations)])


def fwe_from_maxima(maxima: np.ndarray, threshold: float) -> FweEstimate:
    """Family-wise error estimate given per-realization maxima."""
    n = len(maxima)
    k = int(np.count_nonzero(maxima >= threshold))
    lo, hi = wilson_interval(k, n)
    return FweEstimate(k, n, k / n, lo, hi)


def empirical_fwe(config: SimConfig, threshold: float, maxima: Optional[np.ndarray] = None) -> FweEstimate:
    """
    Fraction of realizations whose maximum reaches ``threshold``.

    Pass precomputed ``maxima`` from :func:`realization_maxima` to evaluate
    several thresholds on the same realizations.
    """
    if maxima is None:
        maxima = realization_maxima(config)
    return fwe_from_maxima(maxima, threshold)
