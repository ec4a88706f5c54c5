"""Pixel-grid conditional random field: features, energies, inference, training.

The energy of a labeling is the sum of per-pixel unary costs (negative
log-softmax of a linear model over 11 hand-fixed features) and, over each
4-neighbor edge counted once, a contrast-sensitive Potts penalty
``coupling * exp(-contrast * ||c_i - c_j||^2)`` paid when the two labels
differ.  ``contrast`` is set per image to 1 / (2 * mean squared edge color
difference).  Inference is iterated conditional modes (ICM): raster-order
sweeps, each pixel moving to its locally cheapest label, which never
increases the total energy and stops at a fixed point.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ArgumentError, FormatError
from .images import LabelMap, RgbImage, to_grayscale
from .parallel import map_ordered
from .wavelet import max_levels, wavelet_energy_feature

FEATURE_DIM = 11
RIDGE = 1e-4

_ENUMERATION_LIMIT = 2 ** 20


@dataclass(frozen=True, eq=False)
class PixelFeatureMap:
    """Per-pixel feature vectors; ``data`` has shape (height, width, dim)."""

    data: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if a.ndim != 3:
            raise ArgumentError(f"features must be (H, W, dim), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ArgumentError("feature values must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class UnaryModel:
    """Multinomial logistic unary: ``weights`` is (num_classes, dim)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ArgumentError(f"weights must be (K, dim), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ArgumentError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class PairwiseParams:
    """Potts coupling strength and contrast sensitivity.

    Model-level instances carry ``contrast=0.0`` as a placeholder; energy
    evaluation substitutes the per-image value from ``contrast_scale``.
    """

    coupling: float
    contrast: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.coupling) and self.coupling >= 0.0):
            raise ArgumentError("coupling must be finite and >= 0")
        if not (math.isfinite(self.contrast) and self.contrast >= 0.0):
            raise ArgumentError("contrast must be finite and >= 0")


@dataclass(frozen=True)
class CrfModel:
    unary: UnaryModel
    pairwise: PairwiseParams
    num_classes: int

    def __post_init__(self):
        if self.unary.num_classes != self.num_classes:
            raise ArgumentError(
                f"unary has {self.unary.num_classes} classes, model says {self.num_classes}"
            )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 200
    seed: int = 0  # reserved; training is deterministic with zero init
    coupling_grid: tuple = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
    max_sweeps: int = 50

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.max_sweeps < 1:
            raise ArgumentError("max_sweeps must be >= 1")
        if len(self.coupling_grid) == 0:
            raise ArgumentError("coupling_grid must be non-empty")


# ---------------------------------------------------------------------------
# Features


def extract_features(image: RgbImage) -> PixelFeatureMap:
    """11 features per pixel: bias, r, g, b, x/(W-1), y/(H-1), 3x3 edge-
    clamped mean of each channel, gray value, and the wavelet detail-energy
    share at 2 levels (1 level on tiny images, 0 when no level fits).

    Degenerate axes (single row/column) put 0 in the position entries.
    """
    d = image.data
    h, w = image.height, image.width
    ones = np.ones((h, w))
    xs = np.tile(np.arange(w) / (w - 1), (h, 1)) if w > 1 else np.zeros((h, w))
    ys = np.tile((np.arange(h) / (h - 1))[:, None], (1, w)) if h > 1 else np.zeros((h, w))
    padded = np.pad(d, ((1, 1), (1, 1), (0, 0)), mode="edge")
    box = np.zeros((h, w, 3))
    for dy in range(3):
        for dx in range(3):
            box += padded[dy : dy + h, dx : dx + w]
    box /= 9.0
    gray = to_grayscale(image)
    levels = min(2, max_levels(h, w))
    wav = wavelet_energy_feature(gray, levels) if levels >= 1 else np.zeros((h, w))
    stacked = np.stack(
        [
            ones,
            d[:, :, 0],
            d[:, :, 1],
            d[:, :, 2],
            xs,
            ys,
            box[:, :, 0],
            box[:, :, 1],
            box[:, :, 2],
            gray.values,
            wav,
        ],
        axis=-1,
    )
    return PixelFeatureMap(stacked)


# ---------------------------------------------------------------------------
# Energies


def unary_energy(model: UnaryModel, feature_vector, class_index: int) -> float:
    """Negative log-softmax cost of one class for one pixel."""
    if not 0 <= class_index < model.num_classes:
        raise ArgumentError(f"class index {class_index} out of range")
    f = np.asarray(feature_vector, dtype=np.float64)
    if f.shape != (model.dim,):
        raise ArgumentError(f"feature vector has length {f.size}, expected {model.dim}")
    scores = model.weights @ f
    peak = scores.max()
    logz = peak + math.log(np.exp(scores - peak).sum())
    return float(logz - scores[class_index])


def unary_cost_table(model: UnaryModel, features: PixelFeatureMap):
    """(H, W, K) table of unary costs for every pixel and class."""
    if features.dim != model.dim:
        raise ArgumentError(
            f"features have dim {features.dim}, model expects {model.dim}"
        )
    scores = features.data @ model.weights.T
    peak = scores.max(axis=-1, keepdims=True)
    logz = peak + np.log(np.exp(scores - peak).sum(axis=-1, keepdims=True))
    return np.ascontiguousarray(logz - scores)


def pairwise_energy(params: PairwiseParams, color_i, color_j, label_i, label_j) -> float:
    """Contrast-sensitive Potts term for one edge (0 when labels agree)."""
    if label_i == label_j:
        return 0.0
    d2 = 0.0
    for a, b in zip(color_i, color_j):
        d2 += (a - b) * (a - b)
    return params.coupling * math.exp(-params.contrast * d2)


def contrast_scale(image: RgbImage) -> float:
    """Per-image contrast sensitivity: 1 / (2 * mean squared color difference
    over 4-neighbor edges), or 0 when the mean is 0 (or there are no edges)."""
    d = image.data
    d2h = ((d[:, 1:, :] - d[:, :-1, :]) ** 2).sum(axis=-1)
    d2v = ((d[1:, :, :] - d[:-1, :, :]) ** 2).sum(axis=-1)
    count = d2h.size + d2v.size
    if count == 0:
        return 0.0
    mean = (float(d2h.sum()) + float(d2v.sum())) / count
    return 0.0 if mean == 0.0 else 1.0 / (2.0 * mean)


def _edge_weights(image: RgbImage, contrast: float):
    d = image.data
    d2h = ((d[:, 1:, :] - d[:, :-1, :]) ** 2).sum(axis=-1)
    d2v = ((d[1:, :, :] - d[:-1, :, :]) ** 2).sum(axis=-1)
    return (
        np.ascontiguousarray(np.exp(-contrast * d2h)),
        np.ascontiguousarray(np.exp(-contrast * d2v)),
    )


def _check_grid_match(model, image, features, labels=None):
    if (features.height, features.width) != (image.height, image.width):
        raise ArgumentError("features and image differ in size")
    if features.dim != model.unary.dim:
        raise ArgumentError(
            f"features have dim {features.dim}, model expects {model.unary.dim}"
        )
    if labels is not None:
        if (labels.height, labels.width) != (image.height, image.width):
            raise ArgumentError("labels and image differ in size")
        if labels.num_classes != model.num_classes:
            raise ArgumentError(
                f"labels have {labels.num_classes} classes, model has {model.num_classes}"
            )


def _grid_tables(model, image, features):
    unary = unary_cost_table(model.unary, features)
    wr, wd = _edge_weights(image, contrast_scale(image))
    return unary, wr, wd, model.pairwise.coupling


def total_energy(model: CrfModel, image: RgbImage, features: PixelFeatureMap,
                 labels: LabelMap) -> float:
    """Energy of a labeling: unary sum plus Potts penalties over 4-neighbor
    edges, each edge counted once; contrast set per image."""
    _check_grid_match(model, image, features, labels)
    unary, wr, wd, coupling = _grid_tables(model, image, features)
    lab = np.ascontiguousarray(labels.labels)
    return float(_kernels.grid_energy(unary, wr, wd, coupling, lab))


def exact_map_enumerate(model: CrfModel, image: RgbImage,
                        features: PixelFeatureMap) -> LabelMap:
    """Globally optimal labeling by exhaustive enumeration (test oracle).

    Only admissible when K**(W*H) <= 2**20; ties resolve to the
    lexicographically smallest label sequence in raster order.
    """
    _check_grid_match(model, image, features)
    h, w = image.height, image.width
    k = model.num_classes
    if k ** (w * h) > _ENUMERATION_LIMIT:
        raise ArgumentError(
            f"state space {k}^{w * h} exceeds enumeration limit 2^20"
        )
    unary, wr, wd, coupling = _grid_tables(model, image, features)
    buffer = np.empty((h, w), dtype=np.int32)
    flat = buffer.reshape(-1)
    best_energy = None
    best = None
    for assignment in itertools.product(range(k), repeat=h * w):
        flat[:] = assignment
        energy = _kernels.grid_energy(unary, wr, wd, coupling, buffer)
        if best_energy is None or energy < best_energy:
            best_energy = energy
            best = assignment
    return LabelMap(np.array(best, dtype=np.int32).reshape(h, w), k)


def icm_infer(model: CrfModel, image: RgbImage, features: PixelFeatureMap,
              init: LabelMap | None = None, max_sweeps: int = 50) -> LabelMap:
    """ICM inference: raster sweeps from ``init`` (default: per-pixel unary
    argmin) until a sweep changes nothing or max_sweeps is reached."""
    if max_sweeps < 1:
        raise ArgumentError("max_sweeps must be >= 1")
    _check_grid_match(model, image, features, init)
    unary, wr, wd, coupling = _grid_tables(model, image, features)
    if init is None:
        labels = np.ascontiguousarray(np.argmin(unary, axis=-1).astype(np.int32))
    else:
        labels = np.ascontiguousarray(init.labels.copy())
    for _ in range(max_sweeps):
        if _kernels.icm_sweep(unary, wr, wd, coupling, labels) == 0:
            break
    return LabelMap(labels, model.num_classes)


def icm_infer_traced(model: CrfModel, image: RgbImage, features: PixelFeatureMap,
                     init: LabelMap | None = None, max_sweeps: int = 50):
    """ICM with a per-update energy trace (tiny instances only: the total
    energy is recomputed from scratch after every pixel update).

    Returns (labels, energies) where energies[0] is the initial energy and
    each later entry follows one pixel update.  The sweep logic mirrors the
    production kernels exactly, so the result matches ``icm_infer``.
    """
    if max_sweeps < 1:
        raise ArgumentError("max_sweeps must be >= 1")
    _check_grid_match(model, image, features, init)
    unary, wr, wd, coupling = _grid_tables(model, image, features)
    if init is None:
        labels = np.ascontiguousarray(np.argmin(unary, axis=-1).astype(np.int32))
    else:
        labels = np.ascontiguousarray(init.labels.copy())
    h, w = labels.shape
    k = model.num_classes
    energies = [float(_kernels.grid_energy(unary, wr, wd, coupling, labels))]
    for _ in range(max_sweeps):
        changes = 0
        for y in range(h):
            for x in range(w):
                best, best_cost = 0, 0.0
                for kk in range(k):
                    s = 0.0
                    if x > 0 and labels[y, x - 1] != kk:
                        s += wr[y, x - 1]
                    if x < w - 1 and labels[y, x + 1] != kk:
                        s += wr[y, x]
                    if y > 0 and labels[y - 1, x] != kk:
                        s += wd[y - 1, x]
                    if y < h - 1 and labels[y + 1, x] != kk:
                        s += wd[y, x]
                    cost = unary[y, x, kk] + coupling * s
                    if kk == 0 or cost < best_cost:
                        best, best_cost = kk, cost
                if best != labels[y, x]:
                    labels[y, x] = best
                    changes += 1
                    energies.append(
                        float(_kernels.grid_energy(unary, wr, wd, coupling, labels))
                    )
        if changes == 0:
            break
    return LabelMap(labels, k), energies


# ---------------------------------------------------------------------------
# Training


def unary_loss_and_gradient(weights, features, labels, ridge: float = RIDGE):
    """Mean negative log-likelihood of a multinomial logistic model plus
    ridge * ||W||^2, and its gradient in W.  ``features`` is (N, dim),
    ``labels`` (N,)."""
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    n = f.shape[0]
    scores = f @ w.T
    peak = scores.max(axis=1, keepdims=True)
    logz = peak + np.log(np.exp(scores - peak).sum(axis=1, keepdims=True))
    loss = float((logz[:, 0] - scores[np.arange(n), y]).mean() + ridge * (w * w).sum())
    probs = np.exp(scores - logz)
    probs[np.arange(n), y] -= 1.0
    grad = probs.T @ f / n + 2.0 * ridge * w
    return loss, grad


def _stack_training_pixels(data):
    if not data:
        raise ArgumentError("no training data")
    dims = {fmap.dim for fmap, _ in data}
    if len(dims) != 1:
        raise ArgumentError(f"inconsistent feature dims: {sorted(dims)}")
    features = np.concatenate([fmap.data.reshape(-1, fmap.dim) for fmap, _ in data])
    labels = np.concatenate([lmap.labels.reshape(-1) for _, lmap in data])
    return features, labels


def train_unary(data, num_classes: int, config: TrainConfig = TrainConfig(),
                record_loss: bool = False):
    """Fit the unary model by full-batch gradient descent (zero init, fixed
    step).  ``data`` is a sequence of (PixelFeatureMap, LabelMap) pairs.

    With record_loss=True returns (model, per-epoch losses) for convergence
    checks; otherwise just the model.
    """
    features, labels = _stack_training_pixels(data)
    if labels.size < 1:
        raise ArgumentError("no training pixels")
    if labels.max() >= num_classes:
        raise ArgumentError("label exceeds num_classes")
    weights = np.zeros((num_classes, features.shape[1]))
    losses = []
    for _ in range(config.epochs):
        loss, grad = unary_loss_and_gradient(weights, features, labels)
        losses.append(loss)
        weights = weights - config.learning_rate * grad
    model = UnaryModel(weights)
    return (model, losses) if record_loss else model


def _accuracy(predicted: LabelMap, truth: LabelMap) -> float:
    return float((predicted.labels == truth.labels).mean())


def fit_coupling(data, unary: UnaryModel, grid=None, max_sweeps: int = 50) -> PairwiseParams:
    """Pick the Potts coupling maximizing mean per-image pixel accuracy of
    ICM over ``data`` (sequence of (image, features, labels) triples); ties
    go to the smaller value."""
    if grid is None:
        grid = TrainConfig().coupling_grid
    candidates = sorted(float(c) for c in grid)
    if not candidates:
        raise ArgumentError("empty coupling grid")
    if not data:
        raise ArgumentError("no tuning data")
    num_classes = data[0][2].num_classes
    best_coupling, best_accuracy = None, -1.0

    def run(coupling):
        model = CrfModel(unary, PairwiseParams(coupling), num_classes)

        def one(item):
            image, features, labels = item
            predicted = icm_infer(model, image, features, max_sweeps=max_sweeps)
            return _accuracy(predicted, labels)

        scores = map_ordered(one, data)
        return sum(scores) / len(scores)

    for coupling in candidates:
        accuracy = run(coupling)
        if accuracy > best_accuracy:
            best_coupling, best_accuracy = coupling, accuracy
    return PairwiseParams(best_coupling)


def train_crf(data, num_classes: int, config: TrainConfig = TrainConfig()) -> CrfModel:
    """Full CRF training: extract features, fit the unary model, then select
    the coupling on the same data.  ``data`` holds (RgbImage, LabelMap) pairs."""
    if not data:
        raise ArgumentError("no training data")
    for _, labels in data:
        if labels.num_classes != num_classes:
            raise ArgumentError(
                f"label map has {labels.num_classes} classes, expected {num_classes}"
            )
    feature_maps = map_ordered(lambda pair: extract_features(pair[0]), data)
    unary = train_unary(
        [(fmap, labels) for fmap, (_, labels) in zip(feature_maps, data)],
        num_classes,
        config,
    )
    pairwise = fit_coupling(
        [(image, fmap, labels) for (image, labels), fmap in zip(data, feature_maps)],
        unary,
        config.coupling_grid,
        config.max_sweeps,
    )
    return CrfModel(unary, pairwise, num_classes)


# ---------------------------------------------------------------------------
# Persistence (plain text, 17 significant digits: exact float round-trip)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def unary_to_lines(model: UnaryModel):
    lines = ["HCRF-UNARY v1", f"{model.num_classes} {model.dim}"]
    lines += [" ".join(_fmt(v) for v in row) for row in model.weights]
    return lines


def unary_from_lines(lines):
    it = iter(lines)
    header = next(it, None)
    if header != "HCRF-UNARY v1":
        raise FormatError(f"bad unary header: {header!r}")
    try:
        k, dim = (int(t) for t in next(it).split())
        rows = [[float(t) for t in next(it).split()] for _ in range(k)]
    except (StopIteration, ValueError) as exc:
        raise FormatError(f"malformed unary model: {exc}") from None
    weights = np.array(rows)
    if weights.shape != (k, dim):
        raise FormatError(f"weight matrix shape {weights.shape}, header says {(k, dim)}")
    return UnaryModel(weights)


def model_to_lines(model: CrfModel):
    lines = ["HCRF-MODEL v1", f"{model.num_classes} {model.unary.dim}",
             _fmt(model.pairwise.coupling)]
    lines += [" ".join(_fmt(v) for v in row) for row in model.unary.weights]
    return lines


def model_from_lines(lines):
    it = iter(lines)
    header = next(it, None)
    if header != "HCRF-MODEL v1":
        raise FormatError(f"bad model header: {header!r}")
    try:
        k, dim = (int(t) for t in next(it).split())
        coupling = float(next(it))
        rows = [[float(t) for t in next(it).split()] for _ in range(k)]
    except (StopIteration, ValueError) as exc:
        raise FormatError(f"malformed CRF model: {exc}") from None
    weights = np.array(rows)
    if weights.shape != (k, dim):
        raise FormatError(f"weight matrix shape {weights.shape}, header says {(k, dim)}")
    return CrfModel(UnaryModel(weights), PairwiseParams(coupling), k)


def save_unary(model: UnaryModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(unary_to_lines(model)) + "\n")


def load_unary(path) -> UnaryModel:
    with open(path, encoding="ascii") as fh:
        return unary_from_lines(line.rstrip("\n") for line in fh)


def save_model(model: CrfModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(model_to_lines(model)) + "\n")


def load_model(path) -> CrfModel:
    with open(path, encoding="ascii") as fh:
        return model_from_lines(line.rstrip("\n") for line in fh)
