"""Label-based image descriptor.

A labeled image is summarized by a fixed-length vector over an n x n grid of
cells: per cell, the fraction of pixels belonging to each class (positional
part, length num_classes * n**2), and per cell and class, the mean color of
that class scaled by its coverage fraction (appearance part, length
3 * num_classes * n**2).  Layout is cell-major (row-major cells), class-minor,
with color channels innermost; serialization elsewhere depends on this order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .images import LabelMap, RgbImage


@dataclass(frozen=True)
class DescriptorConfig:
    num_classes: int
    cells_per_axis: int = 4
    appearance_weight: float = 1.0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ArgumentError("num_classes must be >= 1")
        if self.cells_per_axis < 1:
            raise ArgumentError("cells_per_axis must be >= 1")
        if not self.appearance_weight >= 0.0:
            raise ArgumentError("appearance_weight must be >= 0")

    @property
    def positional_length(self):
        return self.num_classes * self.cells_per_axis ** 2

    @property
    def appearance_length(self):
        return 3 * self.num_classes * self.cells_per_axis ** 2

    @property
    def total_length(self):
        return self.positional_length + self.appearance_length


def grid_cells(width: int, height: int, cells_per_axis: int):
    """Rectangles (row0, row1, col0, col1) of the n x n cell partition, in
    row-major cell order.  Boundaries fall at floor(i * extent / n), so the
    cells tile the image exactly."""
    n = cells_per_axis
    if n < 1:
        raise ArgumentError("cells_per_axis must be >= 1")
    if width < n or height < n:
        raise ArgumentError(
            f"image {width}x{height} smaller than a {n}x{n} cell grid"
        )
    row_edges = [i * height // n for i in range(n + 1)]
    col_edges = [j * width // n for j in range(n + 1)]
    return [
        (row_edges[i], row_edges[i + 1], col_edges[j], col_edges[j + 1])
        for i in range(n)
        for j in range(n)
    ]


def positional_descriptor(labels: LabelMap, config: DescriptorConfig):
    """Per-cell class fractions; entries for cell (i,j) and class k sit at
    index (i*n + j) * num_classes + k."""
    if labels.num_classes > config.num_classes:
        raise ArgumentError(
            f"label map has {labels.num_classes} classes, config allows {config.num_classes}"
        )
    cells = grid_cells(labels.width, labels.height, config.cells_per_axis)
    k = config.num_classes
    out = np.zeros(len(cells) * k)
    for c, (r0, r1, c0, c1) in enumerate(cells):
        patch = labels.labels[r0:r1, c0:c1].ravel()
        counts = np.bincount(patch, minlength=k).astype(np.float64)
        out[c * k : (c + 1) * k] = counts / patch.size
    return out


def appearance_descriptor(image: RgbImage, labels: LabelMap, config: DescriptorConfig):
    """Coverage-scaled per-cell mean colors; classes absent from a cell
    contribute zeros.  Channel index is innermost."""
    if (image.width, image.height) != (labels.width, labels.height):
        raise ArgumentError(
            f"image {image.width}x{image.height} and labels "
            f"{labels.width}x{labels.height} differ in size"
        )
    if labels.num_classes > config.num_classes:
        raise ArgumentError(
            f"label map has {labels.num_classes} classes, config allows {config.num_classes}"
        )
    cells = grid_cells(labels.width, labels.height, config.cells_per_axis)
    k = config.num_classes
    out = np.zeros(len(cells) * k * 3)
    for c, (r0, r1, c0, c1) in enumerate(cells):
        patch_labels = labels.labels[r0:r1, c0:c1].ravel()
        patch_pixels = image.data[r0:r1, c0:c1].reshape(-1, 3)
        counts = np.bincount(patch_labels, minlength=k)
        base = c * k * 3
        for cls in range(k):
            if counts[cls] == 0:
                continue
            mean_color = patch_pixels[patch_labels == cls].sum(axis=0) / counts[cls]
            fraction = counts[cls] / patch_labels.size
            out[base + cls * 3 : base + cls * 3 + 3] = fraction * mean_color
    return out


def combine(positional, appearance, config: DescriptorConfig):
    """Concatenate [positional || appearance_weight * appearance]."""
    positional = np.asarray(positional, dtype=np.float64)
    appearance = np.asarray(appearance, dtype=np.float64)
    if positional.shape != (config.positional_length,):
        raise ArgumentError(
            f"positional part has length {positional.size}, expected {config.positional_length}"
        )
    if appearance.shape != (config.appearance_length,):
        raise ArgumentError(
            f"appearance part has length {appearance.size}, expected {config.appearance_length}"
        )
    return np.concatenate([positional, config.appearance_weight * appearance])


def full_descriptor(image: RgbImage, labels: LabelMap, config: DescriptorConfig):
    """Complete descriptor of a labeled image (positional + appearance)."""
    return combine(
        positional_descriptor(labels, config),
        appearance_descriptor(image, labels, config),
        config,
    )


def descriptor_distance(a, b) -> float:
    """Euclidean distance between two descriptor vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ArgumentError(f"descriptor lengths differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.dot(diff, diff)))
