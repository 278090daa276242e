"""
NucleiGrind — Data models for label maps, encodings, attention, losses, metrics and fixtures.

Grids are plain numpy arrays (row-major, row increases downward, col rightward);
the aliases below name what each array holds. Everything else is a dataclass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from engine.errors import ConfigError, DimensionMismatch

# ── Array aliases ────────────────────────────────────────
LabelMap = npt.NDArray[np.int64]       # H×W, 0 = background, k>0 = instance id
BinaryMask = npt.NDArray[np.bool_]     # H×W, True/False
SemanticMask = npt.NDArray[np.int64]   # H×W, values in {0, 1, 2}
DirMap = npt.NDArray[np.int64]         # H×W, 0 = background, 1..K = direction class
ScalarField = npt.NDArray[np.float64]  # H×W×C (C ≥ 1)
FeatureMap = npt.NDArray[np.float64]   # H×W×C
ProbField = npt.NDArray[np.float64]    # H×W×num_classes, rows sum to 1

BACKGROUND = 0
INSIDE = 1
CONTOUR = 2
NUM_SEMANTIC_CLASSES = 3

BACKGROUND_NORM_GLOBAL_MAX = "global-max"


class Encoder(str, Enum):
    """Target encodings generated from a label map."""
    SE = "se"
    HV = "hv"
    DIR = "dir"
    POS = "pos"


class RigidTransform(str, Enum):
    """The rigid grid transforms used for direction-invariance studies."""
    IDENTITY = "identity"
    ROT90 = "rot90"        # clockwise: (r, c) -> (c, H-1-r)
    ROT180 = "rot180"
    ROT270 = "rot270"
    FLIP_H = "flipH"       # mirror columns
    FLIP_V = "flipV"       # mirror rows


class AttentionForm(str, Enum):
    FULL = "full"
    CRISS_CROSS = "criss_cross"


class ShapeFamily(str, Enum):
    DISK = "disk"
    ELLIPSE = "ellipse"
    SQUARE = "square"


# ═══════════════════════════════════════════════════════════
#  CONFIGURATION
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class EncodingConfig:
    """Constants the encodings need but the method leaves open."""
    dir_class_count: int = 8
    background_norm_cap: Union[float, str] = BACKGROUND_NORM_GLOBAL_MAX

    def __post_init__(self) -> None:
        if int(self.dir_class_count) != self.dir_class_count or self.dir_class_count < 2:
            raise ConfigError(f"dir_class_count must be an integer >= 2, got {self.dir_class_count!r}")
        cap = self.background_norm_cap
        if cap != BACKGROUND_NORM_GLOBAL_MAX:
            if isinstance(cap, str) or not np.isfinite(cap) or cap <= 0:
                raise ConfigError(f"background_norm_cap must be positive or '{BACKGROUND_NORM_GLOBAL_MAX}', got {cap!r}")

    @property
    def uses_global_max(self) -> bool:
        return self.background_norm_cap == BACKGROUND_NORM_GLOBAL_MAX


@dataclass(frozen=True)
class LossConfig:
    """Loss weights (λ1, λ2), numerical epsilons and the supervised decoder blocks."""
    lambda1: float = 1.0
    lambda2: float = 1.0
    epsilon_ce: float = 1e-12
    epsilon_dice: float = 1e-6
    scale_blocks: Tuple[int, ...] = (2, 3, 4)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lambda1) and np.isfinite(self.lambda2)):
            raise ConfigError("lambda1 and lambda2 must be finite")
        if self.epsilon_ce <= 0 or self.epsilon_dice <= 0:
            raise ConfigError("loss epsilons must be positive")
        if not self.scale_blocks:
            raise ConfigError("scale_blocks must not be empty")
        object.__setattr__(self, "scale_blocks", tuple(sorted(set(int(b) for b in self.scale_blocks))))
        if self.scale_blocks[0] < 1:
            raise ConfigError("scale blocks are numbered from 1")


@dataclass(frozen=True)
class PostprocConfig:
    """Band thresholds and instance-recovery settings for the testing-phase fusion."""
    t_p: float = 0.05
    t_n: float = -0.05
    connectivity: int = 4
    min_instance_area: int = 0

    def __post_init__(self) -> None:
        if not self.t_n < self.t_p:
            raise ConfigError(f"t_n must be < t_p (got t_n={self.t_n}, t_p={self.t_p})")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.min_instance_area < 0:
            raise ConfigError("min_instance_area must be non-negative")


# ═══════════════════════════════════════════════════════════
#  GRID / NETWORK RECORDS
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Centroid:
    """Mean pixel coordinate of one instance."""
    row: float
    col: float
    instance_id: int


@dataclass
class ConvWeights:
    """Explicit convolution weights, laid out (k, k, in_channels, out_channels)."""
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 4 or self.weights.shape[0] != self.weights.shape[1]:
            raise DimensionMismatch(f"conv weights must be (k, k, cin, cout), got {self.weights.shape}")
        if self.weights.shape[0] not in (1, 3):
            raise DimensionMismatch(f"kernel size must be 1 or 3, got {self.weights.shape[0]}")
        if self.bias.shape != (self.weights.shape[3],):
            raise DimensionMismatch(f"bias shape {self.bias.shape} does not match {self.weights.shape[3]} output channels")

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[2]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[3]

    @classmethod
    def identity(cls, channels: int) -> "ConvWeights":
        return cls(np.eye(channels)[None, None], np.zeros(channels))

    @classmethod
    def pointwise(cls, matrix: np.ndarray, bias: Optional[np.ndarray] = None) -> "ConvWeights":
        """1×1 convolution from a (cin, cout) matrix."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if bias is None:
            bias = np.zeros(matrix.shape[1])
        return cls(matrix[None, None], bias)

    @classmethod
    def random(cls, rng: np.random.Generator, in_channels: int, out_channels: int,
               kernel_size: int = 1) -> "ConvWeights":
        scale = 1.0 / np.sqrt(in_channels * kernel_size * kernel_size)
        w = rng.normal(0.0, scale, size=(kernel_size, kernel_size, in_channels, out_channels))
        return cls(w, rng.normal(0.0, 0.1, size=out_channels))


@dataclass
class SGAWeights:
    """The four 1×1 projections of a structure-guided attention block."""
    query: ConvWeights
    key: ConvWeights
    value_str: ConvWeights
    value_sem: ConvWeights

    def __post_init__(self) -> None:
        structure_width = self.query.in_channels
        if self.key.in_channels != structure_width or self.value_str.in_channels != structure_width:
            raise DimensionMismatch("query, key and value_str must read the same structure feature width")
        if self.key.out_channels != self.query.out_channels:
            raise DimensionMismatch(
                f"query and key widths differ ({self.query.out_channels} vs {self.key.out_channels})"
            )
        # stacked passes re-project the updated structure feature with query / key
        if self.value_str.out_channels != structure_width:
            raise DimensionMismatch(
                f"value_str must keep the structure width {structure_width}, "
                f"got {self.value_str.out_channels}"
            )


@dataclass
class AttentionMap:
    """
    Row-stochastic attention weights.

    Full form: weights is HW×HW and candidates is None.
    Criss-cross form: weights is HW×(H+W-1); candidates[m] holds the flat
    indices (ascending) of the positions sharing a row or column with m.
    """
    form: AttentionForm
    height: int
    width: int
    weights: np.ndarray
    candidates: Optional[np.ndarray] = None


# ═══════════════════════════════════════════════════════════
#  REPORTS
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Match:
    gt_id: int
    pred_id: int
    iou: float


@dataclass
class MetricsReport:
    """The four evaluation metrics for one (prediction, ground truth) pair."""
    dice: float
    aji: float
    hausdorff: float
    pq: float
    matches: list = field(default_factory=list)  # list of Match
    dq: float = 1.0
    sq: float = 1.0

    def to_json(self) -> dict:
        return {
            "dice": float(self.dice),
            "aji": float(self.aji),
            "hausdorff": float(self.hausdorff),
            "pq": float(self.pq),
            "matches": [[int(m.gt_id), int(m.pred_id), float(m.iou)] for m in self.matches],
        }


def _transform_name(t) -> str:
    if isinstance(t, (tuple, list)):
        return "+".join(RigidTransform(step).value for step in t)
    return RigidTransform(t).value


@dataclass
class InvarianceReport:
    """Equivariance error of one encoder under one transform (or a chain of them)."""
    encoder: Encoder
    transform: Union[RigidTransform, Tuple[RigidTransform, ...]]
    max_abs_error: float
    mean_abs_error: float
    pipeline_dice_bias: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "encoder": Encoder(self.encoder).value,
            "transform": _transform_name(self.transform),
            "max_abs_error": float(self.max_abs_error),
            "mean_abs_error": float(self.mean_abs_error),
            "pipeline_dice_bias": None if self.pipeline_dice_bias is None else float(self.pipeline_dice_bias),
        }


@dataclass
class RelationReport:
    """How well HV and Dir are recovered from the structure-encoding gradient."""
    corr_h: float
    corr_v: float
    dir_agreement: float
    interior_pixels: int

    def to_json(self) -> dict:
        return {
            "corr_h": float(self.corr_h),
            "corr_v": float(self.corr_v),
            "dir_agreement": float(self.dir_agreement),
            "interior_pixels": int(self.interior_pixels),
        }


# ═══════════════════════════════════════════════════════════
#  FIXTURES & SELF-CHECK
# ═══════════════════════════════════════════════════════════

@dataclass(frozen=True)
class FixtureSpec:
    """Recipe for a synthetic label map; the seed fully determines the output."""
    height: int = 64
    width: int = 64
    count: int = 5
    shape: ShapeFamily = ShapeFamily.DISK
    radius_min: int = 3
    radius_max: int = 8
    min_gap: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", ShapeFamily(self.shape))
        if self.height < 1 or self.width < 1:
            raise ConfigError("fixture size must be positive")
        if self.count < 0:
            raise ConfigError("instance count must be non-negative")
        if not 1 <= self.radius_min <= self.radius_max:
            raise ConfigError("radius range must satisfy 1 <= min <= max")
        if self.min_gap < 0:
            raise ConfigError("min_gap must be non-negative")


@dataclass
class CheckResult:
    """Outcome of one self-check suite."""
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0
