"""Image types, file I/O, grayscale conversion, and binarization.

Pixels are kept as float64 in [0, 1] everywhere; quantization to 8-bit
happens only at file boundaries (PPM/PGM write with round-half-up, read
with value/255).  PPM P6 is the canonical bit-exact format; P3 and 8-bit
PNG (RGB/RGBA, alpha discarded) are accepted on read.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, FormatError

# Guard against absurd header values before allocating.
_MAX_AXIS = 1 << 20
_MAX_PIXELS = 1 << 26


def _check_dims(width, height):
    if width < 1 or height < 1:
        raise ArgumentError(f"degenerate image dimensions {width}x{height}")
    if width > _MAX_AXIS or height > _MAX_AXIS or width * height > _MAX_PIXELS:
        raise ArgumentError(f"image dimensions {width}x{height} too large")


def _freeze(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Dense RGB image; ``data`` has shape (height, width, 3), values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ArgumentError(f"RGB data must have shape (H, W, 3), got {a.shape}")
        _check_dims(a.shape[1], a.shape[0])
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise ArgumentError("channel values must be finite and lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel image; ``values`` has shape (height, width), in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        if a.ndim != 2:
            raise ArgumentError(f"gray data must have shape (H, W), got {a.shape}")
        _check_dims(a.shape[1], a.shape[0])
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise ArgumentError("gray values must be finite and lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(a))

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Bit image; ``bits`` has shape (height, width) with values in {0, 1}."""

    bits: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.bits)
        if a.ndim != 2:
            raise ArgumentError(f"bit data must have shape (H, W), got {a.shape}")
        _check_dims(a.shape[1], a.shape[0])
        if not np.isin(a, (0, 1)).all():
            raise ArgumentError("bits must be 0 or 1")
        object.__setattr__(self, "bits", _freeze(a.astype(np.uint8)))

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class indices in {0..num_classes-1}; ``labels`` is (height, width)."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        a = np.asarray(self.labels)
        if a.ndim != 2:
            raise ArgumentError(f"label data must have shape (H, W), got {a.shape}")
        _check_dims(a.shape[1], a.shape[0])
        if self.num_classes < 1:
            raise ArgumentError("num_classes must be >= 1")
        if not np.issubdtype(a.dtype, np.integer):
            raise ArgumentError(f"labels must be integers, got dtype {a.dtype}")
        a = a.astype(np.int32, copy=True)
        if a.min() < 0 or a.max() >= self.num_classes:
            raise ArgumentError(
                f"labels must lie in [0, {self.num_classes - 1}]"
            )
        object.__setattr__(self, "labels", _freeze(a))

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def height(self):
        return self.labels.shape[0]


# ---------------------------------------------------------------------------
# PPM / PGM / PNG I/O


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _tokenize_netpbm_header(data, count):
    """Yield ``count`` whitespace-separated header tokens starting after the
    magic number, skipping ``#`` comments, and return (tokens, offset of the
    byte right after the single whitespace that terminates the last token)."""
    tokens = []
    pos = 2  # past the 2-byte magic
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos] == ord("#"):
            eol = data.find(b"\n", pos)
            pos = n if eol < 0 else eol + 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated header")
        tokens.append(data[start:pos])
        if len(tokens) == count:
            if pos >= n:
                raise FormatError("truncated header")
            pos += 1  # exactly one whitespace byte separates header and raster
    return tokens, pos


def _parse_header_ints(tokens):
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise FormatError(f"bad header token: {exc}") from None


def load_image(path) -> RgbImage:
    """Read a PPM (P3/P6) or 8-bit PNG file as an RgbImage.

    Channel bytes map to [0, 1] via value/255.  PNG alpha is discarded.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] in (b"P3", b"P6"):
        return _load_ppm(data)
    if data[:8] == _PNG_MAGIC:
        return _load_png(path)
    raise FormatError(f"unsupported image format in {path!s} (want PPM P3/P6 or PNG)")


def _load_ppm(data) -> RgbImage:
    magic = data[:2]
    tokens, offset = _tokenize_netpbm_header(data, 3)
    width, height, maxval = _parse_header_ints(tokens)
    _check_dims(width, height)
    if maxval != 255:
        raise FormatError(f"unsupported PPM maxval {maxval}: only 8-bit (255) supported")
    n = width * height * 3
    if magic == b"P6":
        raster = data[offset : offset + n]
        if len(raster) < n:
            raise FormatError(f"truncated P6 raster: expected {n} bytes, got {len(raster)}")
        values = np.frombuffer(raster, dtype=np.uint8)
    else:
        parts = data[offset - 1 :].split()
        if len(parts) < n:
            raise FormatError(f"truncated P3 raster: expected {n} samples, got {len(parts)}")
        values = np.array(_parse_header_ints(parts[:n]), dtype=np.int64)
        if values.min() < 0 or values.max() > 255:
            raise FormatError("P3 sample out of range [0, 255]")
    grid = values.reshape(height, width, 3).astype(np.float64) / 255.0
    return RgbImage(grid)


def _load_png(path) -> RgbImage:
    from PIL import Image as PilImage

    with PilImage.open(path) as img:
        if img.mode not in ("RGB", "RGBA"):
            raise FormatError(f"unsupported PNG mode {img.mode!r}: only 8-bit RGB/RGBA")
        arr = np.asarray(img, dtype=np.uint8)
    return RgbImage(arr[:, :, :3].astype(np.float64) / 255.0)


def quantize_channel(values):
    """Map [0, 1] floats to 8-bit with round-half-up, clamped to [0, 255]."""
    return np.clip(np.floor(np.asarray(values) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def save_image(image: RgbImage, path) -> None:
    """Write a PPM P6 file; channels quantized by round(v*255)."""
    raster = quantize_channel(image.data)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster.tobytes())


def read_pgm(path):
    """Read an 8-bit PGM (P5 or P2); returns a (height, width) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"unsupported PGM format in {path!s} (want P5 or P2)")
    tokens, offset = _tokenize_netpbm_header(data, 3)
    width, height, maxval = _parse_header_ints(tokens)
    _check_dims(width, height)
    if not 0 < maxval <= 255:
        raise FormatError(f"unsupported PGM maxval {maxval}: only 8-bit supported")
    n = width * height
    if magic == b"P5":
        raster = data[offset : offset + n]
        if len(raster) < n:
            raise FormatError(f"truncated P5 raster: expected {n} bytes, got {len(raster)}")
        values = np.frombuffer(raster, dtype=np.uint8)
    else:
        parts = data[offset - 1 :].split()
        if len(parts) < n:
            raise FormatError(f"truncated P2 raster: expected {n} samples, got {len(parts)}")
        values = np.array(_parse_header_ints(parts[:n]), dtype=np.int64)
        if values.min() < 0 or values.max() > maxval:
            raise FormatError(f"P2 sample out of range [0, {maxval}]")
        values = values.astype(np.uint8)
    return values.reshape(height, width).copy()


def write_pgm(values, path) -> None:
    """Write a (height, width) array of 0..255 ints as binary PGM (P5)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ArgumentError(f"PGM data must be 2-D, got shape {arr.shape}")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
        raise ArgumentError("PGM samples must lie in [0, 255]")
    arr = arr.astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_label_map(path, num_classes=None) -> LabelMap:
    """Read a label map stored as 8-bit PGM.

    When ``num_classes`` is omitted it is inferred as max(label) + 1.
    """
    values = read_pgm(path)
    if num_classes is None:
        num_classes = int(values.max()) + 1
    return LabelMap(values, num_classes)


def write_label_map(labels: LabelMap, path) -> None:
    """Write a label map as 8-bit PGM; requires num_classes <= 256."""
    if labels.num_classes > 256:
        raise ArgumentError(
            f"cannot store {labels.num_classes} classes in 8-bit PGM (limit 256)"
        )
    write_pgm(labels.labels, path)


# ---------------------------------------------------------------------------
# Grayscale, thresholding, binarization


def to_grayscale(image: RgbImage) -> GrayImage:
    """Rec. 601 luma: (299 r + 587 g + 114 b) / 1000, exact at the corners."""
    d = image.data
    gray = (299.0 * d[:, :, 0] + 587.0 * d[:, :, 1] + 114.0 * d[:, :, 2]) / 1000.0
    return GrayImage(np.clip(gray, 0.0, 1.0))


def otsu_threshold(gray: GrayImage) -> float:
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Pixels are quantized to bins round(v*255); candidate thresholds are bin
    edges b/255 splitting bins < b from bins >= b.  Ties resolve to the
    lowest bin; a constant image returns its own bin's edge.
    """
    bins = quantize_channel(gray.values).ravel()
    hist = np.bincount(bins, minlength=256).astype(np.float64)
    populated = np.nonzero(hist)[0]
    lo, hi = int(populated[0]), int(populated[-1])
    if lo == hi:
        return lo / 255.0
    levels = np.arange(256, dtype=np.float64)
    cum_count = np.cumsum(hist)
    cum_mass = np.cumsum(hist * levels)
    total_count = cum_count[-1]
    total_mass = cum_mass[-1]
    best_bin, best_score = lo + 1, -1.0
    for b in range(lo + 1, hi + 1):
        n0 = cum_count[b - 1]
        n1 = total_count - n0
        mu0 = cum_mass[b - 1] / n0
        mu1 = (total_mass - cum_mass[b - 1]) / n1
        score = n0 * n1 * (mu0 - mu1) ** 2
        if score > best_score:
            best_bin, best_score = b, score
    return best_bin / 255.0


def binarize(gray: GrayImage, threshold: float) -> BinaryImage:
    """Bit = 1 exactly where value >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ArgumentError(f"threshold {threshold} outside [0, 1]")
    return BinaryImage((gray.values >= threshold).astype(np.uint8))


def render_label_map(labels: LabelMap, palette) -> RgbImage:
    """Map each label to its palette color; palette is a sequence of RGB
    triples in [0, 1], at least num_classes long."""
    pal = np.asarray(palette, dtype=np.float64)
    if pal.ndim != 2 or pal.shape[1] != 3:
        raise ArgumentError(f"palette must have shape (n, 3), got {pal.shape}")
    if pal.shape[0] < labels.num_classes:
        raise ArgumentError(
            f"palette has {pal.shape[0]} colors, need {labels.num_classes}"
        )
    return RgbImage(pal[labels.labels])


def default_palette(num_classes: int):
    """Deterministic list of visually distinct RGB colors (values on the
    8-bit grid so rendered files round-trip exactly)."""
    colors = []
    for i in range(num_classes):
        hue = (i * 0.6180339887498949) % 1.0
        sat = 0.65 if i % 2 == 0 else 0.85
        val = 0.95 if i % 3 != 2 else 0.70
        colors.append(_hsv_to_rgb(hue, sat, val))
    quantized = quantize_channel(np.array(colors)) / 255.0
    return [tuple(row) for row in quantized]


def _hsv_to_rgb(h, s, v):
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
