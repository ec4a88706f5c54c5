"""2-D orthonormal Haar analysis/synthesis, coefficient thresholding, and a
per-pixel detail-energy feature.

The 1-D step maps pairs to scaled averages and differences, (a+b)/sqrt(2) and
(a-b)/sqrt(2).  Odd lengths are handled by half-sample symmetric extension:
the last sample is paired with itself, producing an extra approximation entry
of sqrt(2)*x and a zero detail entry, so every subband at level L has
ceil(n / 2**L) entries per axis and reconstruction is still exact.

Subband names follow the usual convention relative to the row-then-column
transform order: LH is the column-difference of row-averages (responds to
horizontal edges), HL the column-average of row-differences (vertical edges),
HH the difference in both directions.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, StructureError
from .images import GrayImage

_SQRT2 = math.sqrt(2.0)


def max_levels(height: int, width: int) -> int:
    """Largest admissible decomposition depth, floor(log2(min(H, W)))."""
    n = min(height, width)
    return n.bit_length() - 1 if n >= 1 else 0


def _subband_shape(height, width, level):
    h, w = height, width
    for _ in range(level):
        h = (h + 1) // 2
        w = (w + 1) // 2
    return h, w


@dataclass(frozen=True, eq=False)
class WaveletPyramid:
    """Multi-level Haar decomposition.

    ``details[i]`` holds the (LH, HL, HH) matrices of level i+1 (finest
    first); ``approx`` is the LL matrix at the coarsest level.
    """

    base_height: int
    base_width: int
    levels: int
    details: tuple
    approx: np.ndarray

    def __post_init__(self):
        if self.levels < 1:
            raise StructureError("pyramid needs at least one level")
        if len(self.details) != self.levels:
            raise StructureError(
                f"expected {self.levels} detail levels, got {len(self.details)}"
            )
        frozen = []
        for i, bands in enumerate(self.details):
            if len(bands) != 3:
                raise StructureError(f"level {i + 1} must hold (LH, HL, HH)")
            want = _subband_shape(self.base_height, self.base_width, i + 1)
            level_bands = []
            for name, band in zip(("LH", "HL", "HH"), bands):
                band = np.asarray(band, dtype=np.float64)
                if band.shape != want:
                    raise StructureError(
                        f"level {i + 1} band {name} has shape {band.shape}, expected {want}"
                    )
                band = np.ascontiguousarray(band)
                band.setflags(write=False)
                level_bands.append(band)
            frozen.append(tuple(level_bands))
        approx = np.asarray(self.approx, dtype=np.float64)
        want = _subband_shape(self.base_height, self.base_width, self.levels)
        if approx.shape != want:
            raise StructureError(
                f"approximation has shape {approx.shape}, expected {want}"
            )
        approx = np.ascontiguousarray(approx)
        approx.setflags(write=False)
        object.__setattr__(self, "details", tuple(frozen))
        object.__setattr__(self, "approx", approx)


def _pad_even_cols(m):
    return np.concatenate([m, m[:, -1:]], axis=1) if m.shape[1] % 2 else m


def _pad_even_rows(m):
    return np.concatenate([m, m[-1:, :]], axis=0) if m.shape[0] % 2 else m


def _step_forward(m):
    """One 2-D Haar level: returns (LL, LH, HL, HH)."""
    r = _pad_even_cols(m)
    row_avg = (r[:, 0::2] + r[:, 1::2]) / _SQRT2
    row_diff = (r[:, 0::2] - r[:, 1::2]) / _SQRT2
    a = _pad_even_rows(row_avg)
    d = _pad_even_rows(row_diff)
    ll = (a[0::2, :] + a[1::2, :]) / _SQRT2
    lh = (a[0::2, :] - a[1::2, :]) / _SQRT2
    hl = (d[0::2, :] + d[1::2, :]) / _SQRT2
    hh = (d[0::2, :] - d[1::2, :]) / _SQRT2
    return ll, lh, hl, hh


def _step_inverse(ll, lh, hl, hh, height, width):
    """Invert one level back to a (height, width) matrix."""
    row_avg = np.empty((height, ll.shape[1]))
    row_diff = np.empty((height, ll.shape[1]))
    pairs = height // 2
    row_avg[0:2 * pairs:2] = (ll[:pairs] + lh[:pairs]) / _SQRT2
    row_avg[1:2 * pairs:2] = (ll[:pairs] - lh[:pairs]) / _SQRT2
    row_diff[0:2 * pairs:2] = (hl[:pairs] + hh[:pairs]) / _SQRT2
    row_diff[1:2 * pairs:2] = (hl[:pairs] - hh[:pairs]) / _SQRT2
    if height % 2:
        # padded row: approximation entry is sqrt(2) * sample, detail is 0
        row_avg[-1] = ll[-1] / _SQRT2
        row_diff[-1] = hl[-1] / _SQRT2
    m = np.empty((height, width))
    pairs = width // 2
    m[:, 0:2 * pairs:2] = (row_avg[:, :pairs] + row_diff[:, :pairs]) / _SQRT2
    m[:, 1:2 * pairs:2] = (row_avg[:, :pairs] - row_diff[:, :pairs]) / _SQRT2
    if width % 2:
        m[:, -1] = row_avg[:, -1] / _SQRT2
    return m


def haar_forward_2d(matrix, levels: int) -> WaveletPyramid:
    """Decompose a real matrix into ``levels`` Haar levels (recursing on LL)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ArgumentError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ArgumentError("matrix entries must be finite")
    height, width = m.shape
    limit = max_levels(height, width)
    if not 1 <= levels <= limit:
        raise ArgumentError(
            f"levels must lie in [1, {limit}] for a {height}x{width} matrix, got {levels}"
        )
    details = []
    current = m
    for _ in range(levels):
        current, lh, hl, hh = _step_forward(current)
        details.append((lh, hl, hh))
    return WaveletPyramid(height, width, levels, tuple(details), current)


def haar_inverse_2d(pyramid: WaveletPyramid):
    """Reconstruct the original matrix; exact up to float rounding."""
    shapes = [
        _subband_shape(pyramid.base_height, pyramid.base_width, lev)
        for lev in range(pyramid.levels + 1)
    ]
    current = pyramid.approx
    for level in range(pyramid.levels, 0, -1):
        lh, hl, hh = pyramid.details[level - 1]
        height, width = shapes[level - 1]
        current = _step_inverse(current, lh, hl, hh, height, width)
    return current


def threshold_compress(pyramid: WaveletPyramid, keep_fraction: float) -> WaveletPyramid:
    """Zero all but the ceil(keep_fraction * N) largest-magnitude detail
    coefficients (the approximation band is never touched).

    Ties keep the earlier coefficient in scan order: level-major (finest
    first), then LH/HL/HH, then row-major within a band.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ArgumentError(f"keep_fraction {keep_fraction} outside (0, 1]")
    flats = [band.ravel() for bands in pyramid.details for band in bands]
    magnitudes = np.abs(np.concatenate(flats))
    total = magnitudes.size
    keep = math.ceil(keep_fraction * total)
    # stable sort on -|c|: equal magnitudes stay in scan order
    order = np.argsort(-magnitudes, kind="stable")
    mask = np.zeros(total, dtype=bool)
    mask[order[:keep]] = True
    new_details = []
    offset = 0
    for bands in pyramid.details:
        level_bands = []
        for band in bands:
            n = band.size
            kept = np.where(
                mask[offset : offset + n].reshape(band.shape), band, 0.0
            )
            level_bands.append(kept)
            offset += n
        new_details.append(tuple(level_bands))
    return WaveletPyramid(
        pyramid.base_height,
        pyramid.base_width,
        pyramid.levels,
        tuple(new_details),
        pyramid.approx,
    )


def wavelet_energy_feature(image: GrayImage, levels: int):
    """Per-pixel share of detail energy.

    Each detail coefficient at level L covers a 2**L x 2**L block of pixels
    (cropped at the border for padded odd sizes); a pixel's raw score is the
    sum of squared coefficients whose block contains it, normalized by the
    total detail energy + 1e-12.  A constant image maps to all zeros.
    """
    pyramid = haar_forward_2d(image.values, levels)
    height, width = image.height, image.width
    acc = np.zeros((height, width))
    total = 0.0
    for level_index, bands in enumerate(pyramid.details, start=1):
        scale = 2 ** level_index
        for band in bands:
            sq = band * band
            total += float(sq.sum())
            spread = np.repeat(np.repeat(sq, scale, axis=0), scale, axis=1)
            acc += spread[:height, :width]
    return acc / (total + 1e-12)
