"""Dense tensor kernels for the keyframe gate and segmentation-side metrics.

Covers the patch/pool/dense pipeline that scores frames for semantic
richness, the pooled-context attention refinement used on feature maps,
the blended auxiliary loss, and the mIoU metric.  Everything operates on
plain float64 numpy arrays; images are (H, W) or (H, W, C) row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import accel
from .costmap import SemanticMap
from .errors import (
    ConfigError,
    DegenerateDataError,
    DomainError,
    LoadError,
    ShapeError,
)

ACTIVATIONS = ("identity", "sigmoid", "relu")


@dataclass(frozen=True, eq=False)
class PatchGrid:
    """Non-overlapping P x P tiles of an image, indexed (row, col)."""

    patches: np.ndarray  # (rows, cols, P, P) or (rows, cols, P, P, C)
    patch_size: int

    @property
    def rows(self) -> int:
        return self.patches.shape[0]

    @property
    def cols(self) -> int:
        return self.patches.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.patches.ndim == 4 else self.patches.shape[4]


def patchify(img: np.ndarray, patch_size: int) -> PatchGrid:
    """Split an image into non-overlapping patch_size x patch_size tiles.

    The patch at grid position (i, j) holds exactly the pixel block
    rows [i*P, (i+1)*P) x cols [j*P, (j+1)*P).  Dimensions must divide
    exactly; there is no implicit padding.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3):
        raise ShapeError(f"image must be 2D or 3D, got shape {img.shape}")
    h, w = img.shape[:2]
    p = int(patch_size)
    if p < 1:
        raise ShapeError(f"patch size must be >= 1, got {p}")
    if h % p or w % p:
        raise ShapeError(f"patch size {p} does not divide image shape {h}x{w}")
    rows, cols = h // p, w // p
    if img.ndim == 2:
        tiles = img.reshape(rows, p, cols, p).transpose(0, 2, 1, 3)
    else:
        tiles = img.reshape(rows, p, cols, p, img.shape[2]).transpose(0, 2, 1, 3, 4)
    return PatchGrid(patches=tiles.copy(), patch_size=p)


def reassemble(grid: PatchGrid) -> np.ndarray:
    """Inverse of patchify: stitch the tiles back into one image."""
    t = grid.patches
    rows, cols, p = t.shape[0], t.shape[1], grid.patch_size
    if t.ndim == 4:
        return t.transpose(0, 2, 1, 3).reshape(rows * p, cols * p)
    return t.transpose(0, 2, 1, 3, 4).reshape(rows * p, cols * p, t.shape[4])


def gap(patch: np.ndarray):
    """Spatial mean of a patch: scalar for 2D input, per-channel vector for 3D."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim == 2:
        return float(patch.sum() / patch.size)
    if patch.ndim == 3:
        return patch.sum(axis=(0, 1)) / (patch.shape[0] * patch.shape[1])
    raise ShapeError(f"patch must be 2D or 3D, got shape {patch.shape}")


def flatten_features(grid: PatchGrid) -> np.ndarray:
    """Row-major vector of per-patch means (single-channel grids only)."""
    if grid.patches.ndim != 4:
        raise ShapeError("flatten_features expects a single-channel patch grid")
    sums = grid.patches.sum(axis=(2, 3))
    return (sums / (grid.patch_size * grid.patch_size)).reshape(-1)


@dataclass(frozen=True, eq=False)
class DenseLayer:
    """Affine layer y = activation(W x + b)."""

    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str = "identity"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weights.ndim != 2:
            raise ShapeError(f"weights must be 2D, got shape {weights.shape}")
        if bias.shape != (weights.shape[0],):
            raise ShapeError(
                f"bias shape {bias.shape} does not match {weights.shape[0]} output rows"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.weights.shape[1],):
        raise ShapeError(
            f"input length {x.shape} does not match weight columns "
            f"({layer.weights.shape[1]})"
        )
    z = layer.weights @ x + layer.bias
    if layer.activation == "sigmoid":
        return _sigmoid(z)
    if layer.activation == "relu":
        return np.maximum(z, 0.0)
    return z


@dataclass(frozen=True, eq=False)
class KeyframeModel:
    """Patch-pool features into a sigmoid dense head; score >= threshold is a keyframe."""

    patch_size: int
    dense: DenseLayer
    threshold: float = 0.5

    def __post_init__(self):
        if self.dense.weights.shape[0] != 1:
            raise ShapeError("keyframe head must have exactly one output")
        if self.dense.activation != "sigmoid":
            raise ConfigError("keyframe head requires a sigmoid activation")
        if not 0.0 < self.threshold < 1.0:
            raise DomainError(f"threshold must lie in (0, 1), got {self.threshold}")

    @property
    def input_len(self) -> int:
        return self.dense.weights.shape[1]


def keyframe_decide(img: np.ndarray, model: KeyframeModel) -> tuple[float, bool]:
    """Score a frame for semantic richness; the boundary score counts as a keyframe."""
    features = flatten_features(patchify(img, model.patch_size))
    score = float(dense_forward(features, model.dense)[0])
    return score, score >= model.threshold


@dataclass(frozen=True)
class TrainResult:
    model: KeyframeModel
    accuracy: float
    losses: tuple[float, ...]  # loss before training plus after each epoch


def train_keyframe(dataset, patch_size: int, epochs: int = 500,
                   learning_rate: float = 0.5) -> TrainResult:
    """Fit the dense head by full-batch gradient descent on cross-entropy.

    Args:
        dataset: sequence of (image, bool) pairs; all images one shape.
        patch_size: tile size for the pooled features.
        epochs: gradient steps.
        learning_rate: step size.

    The pooled features are fixed, so only the single dense layer is
    trained.  Both classes must be present.
    """
    if not dataset:
        raise DegenerateDataError("empty training dataset")
    labels = np.array([1.0 if flag else 0.0 for _, flag in dataset])
    if labels.min() == labels.max():
        raise DegenerateDataError("training dataset contains a single class only")
    features = np.stack(
        [flatten_features(patchify(img, patch_size)) for img, _ in dataset]
    )
    n, dim = features.shape

    w = np.zeros(dim)
    b = 0.0
    eps = 1e-12
    losses = []

    def loss_and_probs():
        probs = _sigmoid(features @ w + b)
        clipped = np.clip(probs, eps, 1.0 - eps)
        value = -float(
            np.mean(labels * np.log(clipped) + (1.0 - labels) * np.log(1.0 - clipped))
        )
        return value, probs

    value, probs = loss_and_probs()
    losses.append(value)
    for _ in range(int(epochs)):
        grad = probs - labels
        w -= learning_rate * (features.T @ grad) / n
        b -= learning_rate * float(np.mean(grad))
        value, probs = loss_and_probs()
        losses.append(value)

    predicted = probs >= 0.5
    accuracy = float(np.mean(predicted == (labels > 0.5)))
    model = KeyframeModel(
        patch_size=int(patch_size),
        dense=DenseLayer(weights=w[None, :], bias=np.array([b]), activation="sigmoid"),
    )
    return TrainResult(model=model, accuracy=accuracy, losses=tuple(losses))


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    tpr_yes: float
    tpr_no: float
    n_yes: int
    n_no: int


def evaluate_keyframe(model: KeyframeModel, dataset) -> EvalReport:
    """Accuracy and per-class true-positive rates of a model on labeled frames."""
    if not dataset:
        raise DegenerateDataError("empty evaluation dataset")
    hits = {True: 0, False: 0}
    totals = {True: 0, False: 0}
    for img, flag in dataset:
        _, decided = keyframe_decide(img, model)
        totals[bool(flag)] += 1
        if decided == bool(flag):
            hits[bool(flag)] += 1
    n = totals[True] + totals[False]
    return EvalReport(
        accuracy=(hits[True] + hits[False]) / n,
        tpr_yes=hits[True] / totals[True] if totals[True] else float("nan"),
        tpr_no=hits[False] / totals[False] if totals[False] else float("nan"),
        n_yes=totals[True],
        n_no=totals[False],
    )


# --- model weights file -----------------------------------------------------

_KFM_MAGIC = b"KFM1"


def save_keyframe_model(model: KeyframeModel, path) -> None:
    """Write the little-endian KFM1 weights file."""
    w = model.dense.weights[0]
    payload = struct.pack("<4sII", _KFM_MAGIC, model.patch_size, w.shape[0])
    payload += w.astype("<f8").tobytes()
    payload += struct.pack("<dd", float(model.dense.bias[0]), model.threshold)
    Path(path).write_bytes(payload)


def load_keyframe_model(path) -> KeyframeModel:
    blob = Path(path).read_bytes()
    head = struct.calcsize("<4sII")
    if len(blob) < head:
        raise LoadError(f"{path}: truncated weights file")
    magic, patch_size, input_len = struct.unpack_from("<4sII", blob)
    if magic != _KFM_MAGIC:
        raise LoadError(f"{path}: bad magic {magic!r}, expected {_KFM_MAGIC!r}")
    expected = head + 8 * input_len + 16
    if len(blob) != expected:
        raise LoadError(f"{path}: expected {expected} bytes, found {len(blob)}")
    weights = np.frombuffer(blob, dtype="<f8", count=input_len, offset=head)
    bias, threshold = struct.unpack_from("<dd", blob, head + 8 * input_len)
    return KeyframeModel(
        patch_size=patch_size,
        dense=DenseLayer(weights=weights[None, :].copy(), bias=np.array([bias]),
                         activation="sigmoid"),
        threshold=threshold,
    )


# --- convolution and attention ----------------------------------------------


def conv2d(fmap: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-shape cross-correlation with zero padding; 1x1 and 3x3 kernels only.

    Accepts (H, W) with a (k, k) or scalar-channel kernel, or (H, W, Cin)
    with kernel (Cout, Cin) for 1x1 and (Cout, Cin, k, k) otherwise.
    """
    fmap = np.asarray(fmap, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    bias = np.atleast_1d(np.asarray(bias, dtype=np.float64))

    squeeze = fmap.ndim == 2
    if squeeze:
        fmap = fmap[:, :, None]
        if kernel.ndim == 2 and kernel.shape[0] == kernel.shape[1] and kernel.shape[0] != 1:
            kernel = kernel[None, None, :, :]  # (k, k) -> (1, 1, k, k)
        elif kernel.ndim == 0:
            kernel = kernel.reshape(1, 1)
    if fmap.ndim != 3:
        raise ShapeError(f"feature map must be 2D or 3D, got shape {fmap.shape}")

    if kernel.ndim == 2:
        size = 1
    elif kernel.ndim == 4 and kernel.shape[2] == kernel.shape[3]:
        size = kernel.shape[2]
    else:
        raise ShapeError(f"kernel shape {kernel.shape} not understood")
    if size not in (1, 3):
        raise ConfigError(f"unsupported kernel size {size}; only 1 and 3 are implemented")

    cin = fmap.shape[2]
    if kernel.shape[1] != cin:
        raise ShapeError(
            f"kernel expects {kernel.shape[1]} input channels, feature map has {cin}"
        )
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match {kernel.shape[0]} outputs")

    if size == 1:
        k2 = kernel if kernel.ndim == 2 else kernel[:, :, 0, 0]
        out = accel.conv2d_1x1(np.ascontiguousarray(fmap), np.ascontiguousarray(k2),
                               np.ascontiguousarray(bias))
    else:
        out = accel.conv2d_3x3(np.ascontiguousarray(fmap), np.ascontiguousarray(kernel),
                               np.ascontiguousarray(bias))
    return out[:, :, 0] if squeeze and out.shape[2] == 1 else out


@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Weights of the pooled-context attention block."""

    w1: np.ndarray  # (C, C) linear map applied to the pooled context vector
    b1: np.ndarray  # (C,)
    w2: np.ndarray  # (C, C, 3, 3) spatial kernel applied to the feature map
    b2: np.ndarray  # (C,)

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b2 = np.asarray(self.b2, dtype=np.float64)
        c = w1.shape[0]
        if w1.shape != (c, c) or b1.shape != (c,):
            raise ShapeError("context map must be (C, C) with a (C,) bias")
        if w2.shape != (c, c, 3, 3) or b2.shape != (c,):
            raise ShapeError("spatial kernel must be (C, C, 3, 3) with a (C,) bias")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, channels: int) -> "AttentionParams":
        return cls(
            w1=np.zeros((channels, channels)),
            b1=np.zeros(channels),
            w2=np.zeros((channels, channels, 3, 3)),
            b2=np.zeros(channels),
        )


def attention_refine(fmap: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Residual refinement: fmap + conv3x3(fmap) * broadcast(linear(pooled(fmap))).

    The pooled context vector (spatial mean per channel) passes through
    the (C, C) map, is broadcast over all positions, and gates the 3x3
    response elementwise; the gated response is added back onto the input.
    """
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3:
        raise ShapeError(f"attention expects an (H, W, C) map, got shape {fmap.shape}")
    c = fmap.shape[2]
    if params.w1.shape[0] != c:
        raise ShapeError(f"params built for {params.w1.shape[0]} channels, map has {c}")
    g = fmap.sum(axis=(0, 1)) / (fmap.shape[0] * fmap.shape[1])
    g_ctx = params.w1 @ g + params.b1
    f_spatial = conv2d(fmap, params.w2, params.b2)
    return fmap + f_spatial * g_ctx[None, None, :]


def combined_loss(l_main: float, l_aux: float, lam: float) -> float:
    """Convex blend of the main and auxiliary losses, weight on the main term."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"blend weight must lie in [0, 1], got {lam}")
    return lam * float(l_main) + (1.0 - lam) * float(l_aux)


def miou(pred: SemanticMap, ref: SemanticMap, num_classes: int = 23) -> float:
    """Mean IoU over the classes present in either map.

    Classes absent from both maps are excluded from the mean; identical
    maps score exactly 1.0.
    """
    if (pred.width, pred.height) != (ref.width, ref.height):
        raise ShapeError(
            f"geometry mismatch: pred {pred.width}x{pred.height} "
            f"vs ref {ref.width}x{ref.height}"
        )
    if pred.resolution != ref.resolution or pred.origin != ref.origin:
        raise ShapeError("geometry mismatch: resolution/origin differ")
    k = int(num_classes)
    p = pred.labels.reshape(-1).astype(np.int64)
    r = ref.labels.reshape(-1).astype(np.int64)
    if p.max() >= k or r.max() >= k:
        raise DomainError(f"labels exceed num_classes={k}")
    confusion = np.bincount(r * k + p, minlength=k * k).reshape(k, k)
    inter = np.diag(confusion).astype(np.float64)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - np.diag(confusion)
    present = union > 0
    return float(np.mean(inter[present] / union[present]))
