"""Two-level labeling pipeline, segmentation utilities, and evaluation.

Training fits one global CRF on everything, summarizes each training image
by its ground-truth label descriptor, clusters the descriptors with k-means,
and fits a dedicated CRF per sufficiently large cluster (small clusters fall
back to the global model).  Labeling runs the global model first, retrieves
the nearest cluster using the descriptor of that initial labeling, and
refines with the cluster's model starting from the initial labels.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .clustering import ClusterSet, kmeans, nearest_cluster
from .crf import (
    CrfModel,
    TrainConfig,
    extract_features,
    icm_infer,
    model_from_lines,
    model_to_lines,
    train_crf,
)
from .descriptor import DescriptorConfig, full_descriptor
from .errors import ArgumentError, FormatError
from .images import LabelMap, RgbImage
from .parallel import map_ordered

_FMT = ".17g"


@dataclass(frozen=True)
class HierarchicalConfig:
    num_classes: int
    cells_per_axis: int = 4
    clusters: int = 3
    appearance_weight: float = 1.0
    kmeans_seed: int = 0
    kmeans_max_iter: int = 100
    min_cluster_size: int = 2
    crf: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.num_classes < 1:
            raise ArgumentError("num_classes must be >= 1")
        if self.clusters < 1:
            raise ArgumentError("clusters must be >= 1")
        if self.min_cluster_size < 1:
            raise ArgumentError("min_cluster_size must be >= 1")

    def descriptor_config(self) -> DescriptorConfig:
        return DescriptorConfig(
            self.num_classes, self.cells_per_axis, self.appearance_weight
        )


@dataclass(frozen=True, eq=False)
class HierarchicalModel:
    global_model: CrfModel
    descriptor_config: DescriptorConfig
    clusters: ClusterSet
    cluster_models: tuple
    num_classes: int

    def __post_init__(self):
        if len(self.cluster_models) != self.clusters.k:
            raise ArgumentError(
                f"{len(self.cluster_models)} cluster models for {self.clusters.k} clusters"
            )
        for model in (self.global_model, *self.cluster_models):
            if model.num_classes != self.num_classes:
                raise ArgumentError("all models must share the class count")


@dataclass(frozen=True, eq=False)
class SegmentMap:
    """Partition of the pixel grid; ids are contiguous 0..segment_count-1."""

    segment_ids: np.ndarray
    segment_count: int

    def __post_init__(self):
        ids = np.ascontiguousarray(np.asarray(self.segment_ids, dtype=np.int32))
        if ids.ndim != 2:
            raise ArgumentError(f"segment ids must be 2-D, got {ids.shape}")
        if self.segment_count < 1:
            raise ArgumentError("segment_count must be >= 1")
        present = np.unique(ids)
        if present[0] != 0 or present[-1] != self.segment_count - 1 or len(
            present
        ) != self.segment_count:
            raise ArgumentError("segment ids must cover 0..segment_count-1")
        ids.setflags(write=False)
        object.__setattr__(self, "segment_ids", ids)

    @property
    def width(self):
        return self.segment_ids.shape[1]

    @property
    def height(self):
        return self.segment_ids.shape[0]


@dataclass(frozen=True)
class Metrics:
    pixel_accuracy: float
    per_class_iou: tuple  # one entry per class; None where the class is absent
    mean_iou: float


class LabelingResult(NamedTuple):
    initial: LabelMap
    cluster: int
    final: LabelMap


# ---------------------------------------------------------------------------
# Training and labeling


def train_hierarchical(data, config: HierarchicalConfig) -> HierarchicalModel:
    """Train the two-level model on (RgbImage, LabelMap) pairs.

    Descriptors come from the ground-truth label maps; clusters smaller than
    min_cluster_size alias the global model instead of training their own.
    """
    data = list(data)
    if not data:
        raise ArgumentError("no training data")
    if config.clusters > len(data):
        raise ArgumentError(
            f"{config.clusters} clusters but only {len(data)} training images"
        )
    global_model = train_crf(data, config.num_classes, config.crf)
    dconf = config.descriptor_config()
    descriptors = np.stack(
        [full_descriptor(image, labels, dconf) for image, labels in data]
    )
    clusters = kmeans(
        descriptors, config.clusters, config.kmeans_seed, config.kmeans_max_iter
    )
    cluster_models = []
    for cluster in range(clusters.k):
        members = [data[i] for i in np.nonzero(clusters.assignments == cluster)[0]]
        if len(members) >= config.min_cluster_size:
            cluster_models.append(train_crf(members, config.num_classes, config.crf))
        else:
            cluster_models.append(global_model)
    return HierarchicalModel(
        global_model, dconf, clusters, tuple(cluster_models), config.num_classes
    )


def label_image(model: HierarchicalModel, image: RgbImage,
                max_sweeps: int = 50) -> LabelingResult:
    """Global labeling, nearest-cluster retrieval on its descriptor, then
    relabeling with the cluster's CRF initialized from the global result."""
    features = extract_features(image)
    initial = icm_infer(model.global_model, image, features, max_sweeps=max_sweeps)
    descriptor = full_descriptor(image, initial, model.descriptor_config)
    cluster = nearest_cluster(model.clusters, descriptor)
    final = icm_infer(
        model.cluster_models[cluster], image, features,
        init=initial, max_sweeps=max_sweeps,
    )
    return LabelingResult(initial, cluster, final)


def label_images(model: HierarchicalModel, images, max_sweeps: int = 50):
    """Label many images (honors HCRF_THREADS; results in input order)."""
    return map_ordered(lambda img: label_image(model, img, max_sweeps), images)


# ---------------------------------------------------------------------------
# Segmentation


def connected_components(labels: LabelMap) -> SegmentMap:
    """4-connected components of equal-label pixels; ids assigned in raster
    order of each component's first pixel."""
    h, w = labels.height, labels.width
    lab = labels.labels.ravel().tolist()
    ids = [-1] * (h * w)
    next_id = 0
    for start in range(h * w):
        if ids[start] >= 0:
            continue
        target = lab[start]
        ids[start] = next_id
        queue = deque([start])
        while queue:
            i = queue.popleft()
            y, x = divmod(i, w)
            for j in (i - 1 if x > 0 else -1,
                      i + 1 if x < w - 1 else -1,
                      i - w if y > 0 else -1,
                      i + w if y < h - 1 else -1):
                if j >= 0 and ids[j] < 0 and lab[j] == target:
                    ids[j] = next_id
                    queue.append(j)
        next_id += 1
    return SegmentMap(np.array(ids, dtype=np.int32).reshape(h, w), next_id)


def segment_map_from_ids(raw_ids) -> SegmentMap:
    """Normalize an externally supplied id grid: relabel to contiguous ids
    ordered by first appearance in raster order."""
    arr = np.asarray(raw_ids)
    if arr.ndim != 2:
        raise ArgumentError(f"segment ids must be 2-D, got {arr.shape}")
    flat = arr.ravel()
    remap = {}
    out = np.empty(flat.size, dtype=np.int32)
    for i, value in enumerate(flat.tolist()):
        if value not in remap:
            remap[value] = len(remap)
        out[i] = remap[value]
    return SegmentMap(out.reshape(arr.shape), len(remap))


def dominant_label_projection(segments: SegmentMap, labels: LabelMap) -> LabelMap:
    """Give every pixel of a segment the segment's most frequent label
    (ties to the smaller label index)."""
    if (segments.height, segments.width) != (labels.height, labels.width):
        raise ArgumentError("segments and labels differ in size")
    counts = np.zeros((segments.segment_count, labels.num_classes), dtype=np.int64)
    np.add.at(counts, (segments.segment_ids.ravel(), labels.labels.ravel()), 1)
    dominant = counts.argmax(axis=1).astype(np.int32)
    return LabelMap(dominant[segments.segment_ids], labels.num_classes)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(predicted: LabelMap, truth: LabelMap) -> Metrics:
    """Pixel accuracy and per-class IoU; classes absent from both maps are
    reported as None and excluded from the mean."""
    if (predicted.height, predicted.width) != (truth.height, truth.width):
        raise ArgumentError("prediction and truth differ in size")
    if predicted.num_classes != truth.num_classes:
        raise ArgumentError("prediction and truth differ in class count")
    return _metrics_from_counts(_confusion_counts(predicted, truth))


def _confusion_counts(predicted: LabelMap, truth: LabelMap):
    k = truth.num_classes
    correct = int((predicted.labels == truth.labels).sum())
    total = predicted.labels.size
    pred_count = np.bincount(predicted.labels.ravel(), minlength=k).astype(np.int64)
    true_count = np.bincount(truth.labels.ravel(), minlength=k).astype(np.int64)
    inter = np.zeros(k, dtype=np.int64)
    agree = predicted.labels == truth.labels
    if agree.any():
        inter = np.bincount(
            truth.labels[agree].ravel(), minlength=k
        ).astype(np.int64)
    return correct, total, pred_count, true_count, inter


def _metrics_from_counts(counts) -> Metrics:
    correct, total, pred_count, true_count, inter = counts
    union = pred_count + true_count - inter
    ious = tuple(
        float(inter[c]) / union[c] if union[c] > 0 else None
        for c in range(len(union))
    )
    defined = [v for v in ious if v is not None]
    mean_iou = sum(defined) / len(defined) if defined else float("nan")
    return Metrics(correct / total, ious, mean_iou)


def evaluate_dataset(pairs):
    """Aggregate metrics over (predicted, truth) pairs.

    Returns (pooled Metrics over all pixels, mean per-image pixel accuracy).
    """
    pairs = list(pairs)
    if not pairs:
        raise ArgumentError("no prediction/truth pairs")
    totals = None
    image_accuracies = []
    for predicted, truth in pairs:
        if predicted.num_classes != truth.num_classes:
            raise ArgumentError("prediction and truth differ in class count")
        if (predicted.height, predicted.width) != (truth.height, truth.width):
            raise ArgumentError("prediction and truth differ in size")
        counts = _confusion_counts(predicted, truth)
        image_accuracies.append(counts[0] / counts[1])
        if totals is None:
            totals = list(counts)
        else:
            totals = [a + b for a, b in zip(totals, counts)]
    pooled = _metrics_from_counts(tuple(totals))
    return pooled, sum(image_accuracies) / len(image_accuracies)


# ---------------------------------------------------------------------------
# Persistence: single plain-text file, header HCRF-HIER v1


def _fmt(x: float) -> str:
    return format(float(x), _FMT)


def hierarchical_to_lines(model: HierarchicalModel):
    dconf = model.descriptor_config
    centroids = model.clusters.centroids
    lines = [
        "HCRF-HIER v1",
        f"classes {model.num_classes}",
        f"descriptor {dconf.cells_per_axis} {dconf.num_classes} {_fmt(dconf.appearance_weight)}",
        f"centroids {centroids.shape[0]} {centroids.shape[1]}",
    ]
    lines += [" ".join(_fmt(v) for v in row) for row in centroids]
    assignments = model.clusters.assignments
    lines.append(f"assignments {assignments.size}")
    lines.append(" ".join(str(int(a)) for a in assignments))
    lines.append(f"inertia {_fmt(model.clusters.inertia)}")
    lines.append("global")
    lines += model_to_lines(model.global_model)
    for index, cmodel in enumerate(model.cluster_models):
        if cmodel is model.global_model:
            lines.append(f"cluster {index} alias")
        else:
            lines.append(f"cluster {index} trained")
            lines += model_to_lines(cmodel)
    return lines


def hierarchical_from_lines(lines):
    it = iter(lines)

    def take(expect_prefix=None):
        line = next(it, None)
        if line is None:
            raise FormatError("truncated hierarchical model file")
        if expect_prefix is not None and not line.startswith(expect_prefix):
            raise FormatError(f"expected {expect_prefix!r}, got {line!r}")
        return line

    def take_model():
        header = take()
        try:
            k, dim = (int(t) for t in take().split())
        except ValueError as exc:
            raise FormatError(f"malformed embedded model: {exc}") from None
        body = [header, f"{k} {dim}", take()] + [take() for _ in range(k)]
        return model_from_lines(body)

    if take() != "HCRF-HIER v1":
        raise FormatError("bad hierarchical model header")
    try:
        num_classes = int(take("classes").split()[1])
        _, cells, dk, weight = take("descriptor").split()
        dconf = DescriptorConfig(int(dk), int(cells), float(weight))
        _, k, dim = take("centroids").split()
        k, dim = int(k), int(dim)
        centroids = np.array(
            [[float(t) for t in take().split()] for _ in range(k)]
        ).reshape(k, dim)
        n = int(take("assignments").split()[1])
        assignments = np.array([int(t) for t in take().split()], dtype=np.int32)
        if assignments.size != n:
            raise FormatError(f"expected {n} assignments, got {assignments.size}")
        inertia = float(take("inertia").split()[1])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed hierarchical model: {exc}") from None
    take("global")
    global_model = take_model()
    cluster_models = []
    for index in range(k):
        parts = take("cluster").split()
        if len(parts) != 3 or int(parts[1]) != index:
            raise FormatError(f"bad cluster record: {' '.join(parts)!r}")
        if parts[2] == "alias":
            cluster_models.append(global_model)
        elif parts[2] == "trained":
            cluster_models.append(take_model())
        else:
            raise FormatError(f"bad cluster kind {parts[2]!r}")
    clusters = ClusterSet(centroids, assignments, inertia)
    return HierarchicalModel(
        global_model, dconf, clusters, tuple(cluster_models), num_classes
    )


def save_hierarchical(model: HierarchicalModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(hierarchical_to_lines(model)) + "\n")


def load_hierarchical(path) -> HierarchicalModel:
    with open(path, encoding="ascii") as fh:
        return hierarchical_from_lines(line.rstrip("\n") for line in fh)
