"""Differentiable smoothness penalty: Huber loss between grids and their blur."""

from dataclasses import dataclass, field

import numpy as np

from .blur import border_weight, separable_blur

DEFAULT_SMOOTHNESS_WEIGHTS = {
    "position": 0.0,
    "sh_dc": 0.0,
    "sh_rest": 0.0,
    "opacity": 0.09,
    "scale": 0.0,
    "rotation": 0.91,
}


@dataclass(frozen=True)
class SmoothnessParams:
    kernel_size: int = 5
    sigma: float = 3.0
    overall_multiplier: float = 1.0
    huber_delta: float = 1.0
    weights: dict = field(default_factory=lambda: dict(DEFAULT_SMOOTHNESS_WEIGHTS))
    # When True, the blurred grid is treated as a constant and the gradient
    # only flows through the identity branch.
    detach_target: bool = False

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be positive")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be >= 0")


def huber(x, delta):
    """0.5*x**2 inside |x| <= delta, linear with matching slope outside."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x)
    return np.where(a <= delta, 0.5 * x * x, delta * (a - 0.5 * delta))


def huber_grad(x, delta):
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=np.float64)
    return np.clip(x, -delta, delta)


def smoothness_loss(stack, params=None):
    """Weighted Huber penalty between each plane and its blurred version.

    Returns (loss, gradients) where gradients maps attribute name to an
    array shaped like the plane. The blur is border-renormalized; unless
    ``detach_target`` is set, the gradient flows through both the identity
    and the blur branch (the target depends on the current values).
    """
    params = params or SmoothnessParams()
    radius = params.kernel_size // 2
    loss = 0.0
    gradients = {}
    for name, plane in stack.planes.items():
        weight = params.weights.get(name, 0.0)
        coeff = params.overall_multiplier * weight
        plane = np.asarray(plane, dtype=np.float64)
        if coeff == 0.0 or plane.size == 0:
            gradients[name] = np.zeros_like(plane)
            continue
        if radius == 0:
            residual = np.zeros_like(plane)
            den = np.ones(plane.shape[:2])
        else:
            den = border_weight(plane.shape, params.sigma, radius)
            # Blur an anchored copy: the renormalized kernel maps constants
            # to themselves, so subtracting a per-channel reference value
            # first makes the residual exactly zero on constant planes
            # (instead of float round-off dust) without changing the math.
            anchor = plane[:1, :1, :]
            centered = plane - anchor
            residual = centered - separable_blur(centered, params.sigma, radius) / den[..., None]
        loss += coeff * float(huber(residual, params.huber_delta).mean())
        upstream = coeff / plane.size * huber_grad(residual, params.huber_delta)
        if params.detach_target or radius == 0:
            gradients[name] = upstream
        else:
            # d(blur)/d(plane) is linear: B = K / den with K the zero-padded
            # kernel (symmetric), so B^T v = K(v / den).
            back = separable_blur(upstream / den[..., None], params.sigma, radius)
            gradients[name] = upstream - back
    return loss, gradients
