"""Deterministic synthetic scenes for training and end-to-end evaluation.

Scenes are horizontal color bands (top to bottom) with optional rectangle
objects painted on top, plus seeded per-channel Gaussian noise.  The label
map records the painted class of every pixel exactly, so generated data is
its own ground truth.

The bimodal benchmark builds two scene families that share one ambiguous
color: a mid gray that means "road" (bottom band) in family A but "wall"
(top band) in family B.  The two gray bands overlap in image rows, so inside
the overlap the per-pixel features of gray pixels are identical across
families while their true classes differ — no single unary model can beat
the majority vote there, but a per-family model can.  Family membership is
plainly visible in the descriptor (different classes and colors in the top
band), which is what cluster retrieval exploits.
"""

from dataclasses import dataclass, field

from .errors import ArgumentError
from .images import LabelMap, RgbImage
from .rng import Xorshift64Star

import numpy as np

CLASS_SKY = 0
CLASS_WALL = 1
CLASS_ROAD = 2

AMBIGUOUS_GRAY = (0.5, 0.5, 0.5)
_SKY_BLUE = (0.25, 0.55, 0.9)
_ROAD_BROWN = (0.45, 0.3, 0.15)


@dataclass(frozen=True)
class RectSpec:
    """Axis-aligned rectangle object: class, top-left corner, size, and an
    optional color overriding the palette."""

    class_id: int
    row: int
    col: int
    height: int
    width: int
    color: tuple = None


@dataclass(frozen=True)
class SceneSpec:
    family: str
    width: int
    height: int
    num_classes: int
    seed: int
    noise_sigma: float
    palette: dict  # class id -> base RGB
    layout: tuple  # ((class_id, fraction), ...) top to bottom
    rects: tuple = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ArgumentError("scene dimensions must be positive")
        if self.num_classes < 1:
            raise ArgumentError("num_classes must be >= 1")
        if self.noise_sigma < 0:
            raise ArgumentError("noise_sigma must be >= 0")
        if not self.layout:
            raise ArgumentError("layout must name at least one band")
        total = 0.0
        for class_id, fraction in self.layout:
            if fraction < 0:
                raise ArgumentError(f"negative band fraction {fraction}")
            if not 0 <= class_id < self.num_classes:
                raise ArgumentError(f"band class {class_id} out of range")
            total += fraction
        if abs(total - 1.0) > 1e-9:
            raise ArgumentError(f"band fractions sum to {total}, expected 1")
        for class_id in {cid for cid, _ in self.layout} | {r.class_id for r in self.rects}:
            color = self.palette.get(class_id)
            if color is None:
                raise ArgumentError(f"palette missing class {class_id}")
            if any(not 0.0 <= v <= 1.0 for v in color):
                raise ArgumentError(f"palette color for class {class_id} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class LabeledScene:
    image: RgbImage
    labels: LabelMap
    family: str


def generate_scene(spec: SceneSpec):
    """Paint the bands (then rectangles), add seeded Gaussian noise, clamp.

    Returns (RgbImage, LabelMap); the label map is exact ground truth.
    Noise values are drawn pixel by pixel in raster order, channels
    innermost, from xorshift64* seeded with spec.seed.
    """
    h, w = spec.height, spec.width
    image = np.zeros((h, w, 3))
    labels = np.zeros((h, w), dtype=np.int32)
    cumulative = 0.0
    for index, (class_id, fraction) in enumerate(spec.layout):
        row0 = int(cumulative * h)
        cumulative += fraction
        row1 = h if index == len(spec.layout) - 1 else int(cumulative * h)
        image[row0:row1] = spec.palette[class_id]
        labels[row0:row1] = class_id
    for rect in spec.rects:
        r0, c0 = max(0, rect.row), max(0, rect.col)
        r1 = min(h, rect.row + rect.height)
        c1 = min(w, rect.col + rect.width)
        if r0 >= r1 or c0 >= c1:
            continue
        image[r0:r1, c0:c1] = rect.color if rect.color is not None else spec.palette[rect.class_id]
        labels[r0:r1, c0:c1] = rect.class_id
    if spec.noise_sigma > 0:
        rng = Xorshift64Star(spec.seed)
        flat = image.reshape(-1)
        noisy = [
            value + spec.noise_sigma * rng.next_gaussian()
            for value in flat.tolist()
        ]
        image = np.clip(np.array(noisy).reshape(h, w, 3), 0.0, 1.0)
    return RgbImage(image), LabelMap(labels, spec.num_classes)


def _bimodal_spec(family, index, size, noise_sigma, jitter, seed):
    if family == "a":
        top = 0.3 + jitter
        layout = ((CLASS_SKY, top), (CLASS_ROAD, 1.0 - top))
        palette = {CLASS_SKY: _SKY_BLUE, CLASS_ROAD: AMBIGUOUS_GRAY}
    else:
        top = 0.7 + jitter
        layout = ((CLASS_WALL, top), (CLASS_ROAD, 1.0 - top))
        palette = {CLASS_WALL: AMBIGUOUS_GRAY, CLASS_ROAD: _ROAD_BROWN}
    return SceneSpec(
        family=family,
        width=size,
        height=size,
        num_classes=3,
        seed=seed,
        noise_sigma=noise_sigma,
        palette=palette,
        layout=layout,
    )


def generate_bimodal_benchmark(seed: int, count_per_family: int, size: int,
                               noise_sigma: float = 0.05):
    """Two-family benchmark where cluster retrieval provably helps.

    Family A: blue sky over a gray road band (gray at the bottom ~70%).
    Family B: gray wall band (top ~70%) over a brown road.  Band boundaries
    jitter by up to ±0.05 per image, so the two gray bands always overlap in
    rows 35%..65% of the height.  Returns (train, test) lists of
    LabeledScene, split 70/30 per family in generation order.
    """
    if count_per_family < 2:
        raise ArgumentError("count_per_family must be >= 2")
    if size < 8:
        raise ArgumentError("size must be >= 8")
    master = Xorshift64Star(seed)
    train, test = [], []
    train_count = max(1, min(count_per_family - 1, (count_per_family * 7) // 10))
    for family in ("a", "b"):
        for index in range(count_per_family):
            jitter = (master.next_double() - 0.5) * 0.1
            scene_seed = master.next_uint64()
            spec = _bimodal_spec(family, index, size, noise_sigma, jitter, scene_seed)
            image, labels = generate_scene(spec)
            scene = LabeledScene(image, labels, family)
            (train if index < train_count else test).append(scene)
    return train, test


def as_pairs(scenes):
    """Strip family tags: [(image, labels), ...] for the training APIs."""
    return [(scene.image, scene.labels) for scene in scenes]
