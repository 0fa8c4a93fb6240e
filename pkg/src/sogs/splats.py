"""Core data model: splat clouds, grid layout, pruning and sort normalization."""

import math
from dataclasses import dataclass, field

import numpy as np

# Fixed attribute order; one 2D plane group per attribute.
ATTRIBUTES = ("position", "sh_dc", "sh_rest", "opacity", "scale", "rotation")

# Channel counts for the fixed-size attributes; sh_rest is 0 or 45.
CHANNELS = {"position": 3, "sh_dc": 3, "opacity": 1, "scale": 3, "rotation": 4}

SH_REST_SIZES = (0, 45)

# Default per-attribute sorting weights.
DEFAULT_SORT_WEIGHTS = {
    "position": 1.0,
    "sh_dc": 1.0,
    "sh_rest": 0.0,
    "opacity": 0.0,
    "scale": 1.0,
    "rotation": 0.0,
}


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class SplatCloud:
    """An ordered list of Gaussians holding un-activated parameters.

    All arrays share the same length n >= 1. ``sh_rest`` has 0 or 45
    columns (degree-0 or degree-3 spherical harmonics).
    """

    positions: np.ndarray      # (n, 3) world units
    sh_dc: np.ndarray          # (n, 3)
    sh_rest: np.ndarray        # (n, 0) or (n, 45)
    opacity_logit: np.ndarray  # (n,)
    scale_log: np.ndarray      # (n, 3)
    rotation: np.ndarray       # (n, 4) unnormalized quaternion

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        n = pos.shape[0]
        if n < 1:
            raise ValueError("a SplatCloud needs at least one Gaussian")
        fields = {
            "positions": (pos, (n, 3)),
            "sh_dc": (np.asarray(self.sh_dc, dtype=np.float64), (n, 3)),
            "sh_rest": (np.asarray(self.sh_rest, dtype=np.float64).reshape(n, -1), None),
            "opacity_logit": (np.asarray(self.opacity_logit, dtype=np.float64).reshape(-1), (n,)),
            "scale_log": (np.asarray(self.scale_log, dtype=np.float64), (n, 3)),
            "rotation": (np.asarray(self.rotation, dtype=np.float64), (n, 4)),
        }
        for name, (arr, shape) in fields.items():
            if shape is not None and arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN/Inf")
            object.__setattr__(self, name, arr)
        if self.sh_rest.shape[1] not in SH_REST_SIZES:
            raise ValueError(f"sh_rest must have 0 or 45 columns, got {self.sh_rest.shape[1]}")

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def sh_degree(self):
        return 3 if self.sh_rest.shape[1] == 45 else 0

    def attribute(self, name):
        """Un-activated values of one attribute as an (n, C) array."""
        if name == "position":
            return self.positions
        if name == "opacity":
            return self.opacity_logit.reshape(-1, 1)
        if name == "scale":
            return self.scale_log
        return getattr(self, name)

    def activated(self, name):
        """Attribute values as the renderer sees them (n, C)."""
        raw = self.attribute(name)
        if name == "opacity":
            return sigmoid(raw)
        if name == "scale":
            return np.exp(raw)
        return raw

    def select(self, index):
        """New cloud containing the rows picked by ``index`` (in that order)."""
        return SplatCloud(
            positions=self.positions[index],
            sh_dc=self.sh_dc[index],
            sh_rest=self.sh_rest[index],
            opacity_logit=self.opacity_logit[index],
            scale_log=self.scale_log[index],
            rotation=self.rotation[index],
        )

    def without_sh_rest(self):
        return SplatCloud(
            positions=self.positions,
            sh_dc=self.sh_dc,
            sh_rest=np.zeros((self.n, 0)),
            opacity_logit=self.opacity_logit,
            scale_log=self.scale_log,
            rotation=self.rotation,
        )


@dataclass(frozen=True)
class GridLayout:
    """Square grid dimensions; ``side`` is width and height."""

    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("grid side must be positive")

    @property
    def cells(self):
        return self.side * self.side


def build_grid_layout(n):
    """Largest square grid that n points can completely fill."""
    if n < 1:
        raise ValueError("need at least one point to build a grid layout")
    return GridLayout(side=math.isqrt(n))


def prune_to_grid(cloud, layout):
    """Drop the lowest-opacity Gaussians so exactly side**2 remain.

    Ties are broken by original index (stable); survivor order is preserved.
    """
    keep = layout.cells
    if keep > cloud.n:
        raise ValueError("layout does not fit the cloud")
    if keep == cloud.n:
        return cloud
    # Sigmoid is monotone, so ranking the logits ranks activated opacity.
    order = np.argsort(cloud.opacity_logit, kind="stable")
    survivors = np.sort(order[cloud.n - keep:])
    return cloud.select(survivors)


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-attribute affine [0,1] normalization and sorting weights.

    ``mins``/``maxs`` are per-channel over the activated values; channels
    with max == min are flagged constant and map to 0.
    """

    mins: dict
    maxs: dict
    weights: dict

    def constant_channels(self, name):
        return self.maxs[name] <= self.mins[name]

    def denormalize(self, name, columns):
        """Invert normalization (weight and affine map) for one attribute.

        Constant channels are restored from the stored minimum.
        """
        w = self.weights[name]
        lo, hi = self.mins[name], self.maxs[name]
        const = self.constant_channels(name)
        span = np.where(const, 1.0, hi - lo)
        out = np.asarray(columns, dtype=np.float64) / w * span + lo
        out[:, const] = lo[const]
        return out


def normalize_for_sorting(cloud, weights=None):
    """Build the weighted sorting feature matrix.

    Each activated attribute channel is mapped affinely to [0, 1] over the
    cloud's own min/max and scaled by its weight. Attributes with weight 0
    are dropped (their contribution to every distance would be 0).
    Returns (features, NormalizationSpec); features has shape (n, D).
    """
    weights = dict(DEFAULT_SORT_WEIGHTS, **(weights or {}))
    for name, w in weights.items():
        if name not in ATTRIBUTES:
            raise ValueError(f"unknown attribute {name!r}")
        if w < 0:
            raise ValueError("sorting weights must be >= 0")
    mins, maxs = {}, {}
    columns = []
    for name in ATTRIBUTES:
        values = cloud.activated(name)
        lo = values.min(axis=0)
        hi = values.max(axis=0)
        mins[name], maxs[name] = lo, hi
        w = weights[name]
        if w == 0.0 or values.shape[1] == 0:
            continue
        span = np.where(hi > lo, hi - lo, 1.0)
        scaled = (values - lo) / span * w
        scaled[:, hi <= lo] = 0.0
        columns.append(scaled)
    if columns:
        features = np.concatenate(columns, axis=1)
    else:
        features = np.zeros((cloud.n, 1))
    return features, NormalizationSpec(mins=mins, maxs=maxs, weights=weights)


@dataclass(frozen=True)
class GridStack:
    """Per-attribute 2D planes sharing one permutation; one cell per Gaussian."""

    layout: GridLayout
    planes: dict = field(default_factory=dict)

    def __post_init__(self):
        side = self.layout.side
        for name, plane in self.planes.items():
            if name not in ATTRIBUTES:
                raise ValueError(f"unknown attribute {name!r}")
            if plane.shape[:2] != (side, side):
                raise ValueError(f"plane {name!r} is {plane.shape[:2]}, expected {(side, side)}")


def stack_from_cloud(cloud, permutation, layout):
    """Arrange a cloud's un-activated attributes into grid planes.

    ``permutation[cell]`` is the cloud row placed at that (row-major) cell.
    """
    if cloud.n != layout.cells:
        raise ValueError("cloud does not fill the layout exactly")
    side = layout.side
    planes = {}
    for name in ATTRIBUTES:
        values = cloud.attribute(name)
        if values.shape[1] == 0:
            continue
        planes[name] = values[permutation].reshape(side, side, -1)
    return GridStack(layout=layout, planes=planes)


def cloud_from_stack(stack):
    """Flatten grid planes row-major back into a SplatCloud."""
    cells = stack.layout.cells

    def flat(name, channels):
        plane = stack.planes.get(name)
        if plane is None:
            return np.zeros((cells, channels))
        return plane.reshape(cells, -1)

    return SplatCloud(
        positions=flat("position", 3),
        sh_dc=flat("sh_dc", 3),
        sh_rest=flat("sh_rest", 0),
        opacity_logit=flat("opacity", 1).reshape(-1),
        scale_log=flat("scale", 3),
        rotation=flat("rotation", 4),
    )
