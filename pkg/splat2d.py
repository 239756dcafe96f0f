"""
2D Gaussian image fitting.

A GaussianCloud is a structure of arrays (one row per primitive) together
with its Adam moments and densification statistics, in the spirit of the
3DGS GaussianModel: densification appends rows with zero optimizer state
and pruning drops rows from every array at once.

Coordinates are pixels, x along columns and y along rows; pixel (r, c)
is sampled at its center (c + 0.5, r + 0.5). Primitives accumulate
additively:

    I(p) = sum_g sigmoid(o_g) * color_g * exp(-0.5 (p - mu_g)^T Sigma_g^-1 (p - mu_g))

and every primitive is evaluated only inside its 3-sigma bounding box.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from logger_config import get_logger
from transform import as_image
from utils.exceptions import ShapeMismatchError

logger = get_logger(__name__)

PARAM_NAMES = ('means', 'log_scales', 'rotations', 'colors', 'opacity_logits')

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11x11 window
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
PSNR_CAP = 99.0

BOX_SIGMAS = 3.0
SPLIT_SCALE_DIVISOR = 1.6
# Upper bound on primitives x patch pixels evaluated per vectorized chunk.
CHUNK_ELEMENTS = 1 << 21

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-15


@dataclass
class Gaussian2D:
    """A single primitive, as a standalone value."""

    mean: np.ndarray
    log_scale: np.ndarray
    rotation: float
    color: np.ndarray
    opacity_logit: float


@dataclass
class GaussianCloud:
    """Primitives plus optimizer and densification bookkeeping."""

    means: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    colors: np.ndarray
    opacity_logits: np.ndarray
    grad_accum: np.ndarray = None
    grad_count: np.ndarray = None
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    peak_count: int = 0

    def __post_init__(self) -> None:
        n = len(self.means)
        if self.grad_accum is None:
            self.grad_accum = np.zeros(n)
        if self.grad_count is None:
            self.grad_count = np.zeros(n, dtype=np.int64)
        for name in PARAM_NAMES:
            self.exp_avg.setdefault(name, np.zeros_like(getattr(self, name)))
            self.exp_avg_sq.setdefault(name, np.zeros_like(getattr(self, name)))
        self.peak_count = max(self.peak_count, n)

    def __len__(self) -> int:
        return len(self.means)

    @property
    def channels(self) -> int:
        return self.colors.shape[1]

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    @classmethod
    def from_gaussians(cls, gaussians: List[Gaussian2D], channels: int = 3) -> 'GaussianCloud':
        if not gaussians:
            return cls.empty(channels)
        return cls(
            means=np.array([g.mean for g in gaussians], dtype=np.float64),
            log_scales=np.array([g.log_scale for g in gaussians], dtype=np.float64),
            rotations=np.array([g.rotation for g in gaussians], dtype=np.float64),
            colors=np.array([g.color for g in gaussians], dtype=np.float64),
            opacity_logits=np.array([g.opacity_logit for g in gaussians], dtype=np.float64),
        )

    @classmethod
    def empty(cls, channels: int = 3) -> 'GaussianCloud':
        return cls(means=np.zeros((0, 2)), log_scales=np.zeros((0, 2)), rotations=np.zeros(0),
                   colors=np.zeros((0, channels)), opacity_logits=np.zeros(0))

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> 'GaussianCloud':
        return GaussianCloud(
            **{name: value.copy() for name, value in self.params().items()},
            grad_accum=self.grad_accum.copy(),
            grad_count=self.grad_count.copy(),
            exp_avg={k: v.copy() for k, v in self.exp_avg.items()},
            exp_avg_sq={k: v.copy() for k, v in self.exp_avg_sq.items()},
            step=self.step,
            peak_count=self.peak_count,
        )

    def _keep(self, mask: np.ndarray) -> None:
        for name in PARAM_NAMES:
            setattr(self, name, getattr(self, name)[mask])
            self.exp_avg[name] = self.exp_avg[name][mask]
            self.exp_avg_sq[name] = self.exp_avg_sq[name][mask]
        self.grad_accum = self.grad_accum[mask]
        self.grad_count = self.grad_count[mask]

    def _append(self, new: Dict[str, np.ndarray]) -> None:
        for name in PARAM_NAMES:
            setattr(self, name, np.concatenate([getattr(self, name), new[name]]))
            zeros = np.zeros_like(new[name])
            self.exp_avg[name] = np.concatenate([self.exp_avg[name], zeros])
            self.exp_avg_sq[name] = np.concatenate([self.exp_avg_sq[name], zeros])
        added = len(new['means'])
        self.grad_accum = np.concatenate([self.grad_accum, np.zeros(added)])
        self.grad_count = np.concatenate([self.grad_count, np.zeros(added, dtype=np.int64)])


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def init_cloud(target, n0: int, seed: int) -> GaussianCloud:
    """
    Scatter n0 isotropic primitives uniformly over the target.

    Args:
        target: Image whose colors seed the primitives
        n0: Number of primitives (>= 1)
        seed: Seed for the uniform mean sampling

    Returns:
        GaussianCloud
    """
    if n0 < 1:
        raise ValueError(f'n0 must be >= 1, got {n0}')
    target = as_image(target)
    h, w, c = target.shape
    rng = np.random.default_rng(seed)

    means = rng.uniform(low=(0.0, 0.0), high=(w, h), size=(n0, 2))
    scale = math.hypot(h, w) / math.sqrt(n0)
    rows = np.clip(means[:, 1].astype(np.int64), 0, h - 1)
    cols = np.clip(means[:, 0].astype(np.int64), 0, w - 1)

    return GaussianCloud(
        means=means,
        log_scales=np.full((n0, 2), math.log(scale)),
        rotations=np.zeros(n0),
        colors=target[rows, cols, :].copy(),
        opacity_logits=np.zeros(n0),
    )


@dataclass
class _Footprint:
    """Patch evaluation of a chunk of primitives."""

    index: np.ndarray      # (n,) primitive ids
    flat: np.ndarray       # (n, Ky, Kx) flat pixel ids, 0 outside the box
    u1: np.ndarray         # rotated offsets
    u2: np.ndarray
    density: np.ndarray    # exp(-q/2), zero outside the box


@dataclass
class Rasterization:
    """A rendered image together with the footprints that produced it."""

    image: np.ndarray
    footprints: List[_Footprint]
    count: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.image.shape[:2]


def _box_ranges(center: np.ndarray, radius: np.ndarray, limit: int) -> Tuple[np.ndarray, np.ndarray]:
    # Pixels whose centers fall inside [center - r, center + r], clipped to the raster.
    lo = np.maximum(np.ceil(center - radius - 0.5), 0).astype(np.int64)
    hi = np.minimum(np.floor(center + radius - 0.5), limit - 1).astype(np.int64)
    return lo, np.maximum(hi - lo + 1, 0)


def _footprints(cloud: GaussianCloud, h: int, w: int) -> Iterator[_Footprint]:
    if len(cloud) == 0:
        return
    scales = cloud.scales
    radius = BOX_SIGMAS * scales.max(axis=1)
    x0, nx = _box_ranges(cloud.means[:, 0], radius, w)
    y0, ny = _box_ranges(cloud.means[:, 1], radius, h)

    visible = np.flatnonzero((nx > 0) & (ny > 0))
    # Sort by footprint so each chunk pads to a similar patch size.
    order = visible[np.argsort(np.maximum(nx, ny)[visible], kind='stable')]

    start = 0
    while start < len(order):
        side = max(int(nx[order[start]]), int(ny[order[start]]))
        stop = start
        while stop < len(order):
            side = max(side, int(nx[order[stop]]), int(ny[order[stop]]))
            if (stop - start + 1) * side * side > CHUNK_ELEMENTS and stop > start:
                break
            stop += 1
        idx = order[start:stop]
        kx = int(nx[idx].max())
        ky = int(ny[idx].max())
        yield _evaluate_chunk(cloud, idx, x0[idx], nx[idx], y0[idx], ny[idx], kx, ky, w, scales[idx])
        start = stop


def _evaluate_chunk(cloud, idx, x0, nx, y0, ny, kx, ky, w, scales) -> _Footprint:
    ox = np.arange(kx)
    oy = np.arange(ky)
    cols = x0[:, None] + ox[None, :]
    rows = y0[:, None] + oy[None, :]
    mask = (ox[None, None, :] < nx[:, None, None]) & (oy[None, :, None] < ny[:, None, None])

    dx = (cols + 0.5 - cloud.means[idx, 0:1])[:, None, :]
    dy = (rows + 0.5 - cloud.means[idx, 1:2])[:, :, None]
    cos = np.cos(cloud.rotations[idx])[:, None, None]
    sin = np.sin(cloud.rotations[idx])[:, None, None]
    u1 = cos * dx + sin * dy
    u2 = -sin * dx + cos * dy
    s1 = scales[:, 0][:, None, None]
    s2 = scales[:, 1][:, None, None]
    q = (u1 / s1) ** 2 + (u2 / s2) ** 2
    density = np.exp(-0.5 * q)
    density *= mask

    # Padding points at pixel 0 with zero density, so no compaction is needed.
    flat = rows[:, :, None] * w + cols[:, None, :]
    flat *= mask
    return _Footprint(index=idx, flat=flat, u1=u1, u2=u2, density=density)


def rasterize(cloud: GaussianCloud, h: int, w: int) -> Rasterization:
    """
    Render the cloud and keep its footprints for render_backward.

    The footprints stay valid until the cloud's parameters change.
    """
    if h < 1 or w < 1:
        raise ValueError(f'render size must be positive, got {h}x{w}')
    c = cloud.channels
    image = np.zeros((c, h * w))
    opacities = cloud.opacities
    footprints = list(_footprints(cloud, h, w))
    for fp in footprints:
        weight = opacities[fp.index][:, None, None] * fp.density
        pixels = fp.flat.ravel()
        for ch in range(c):
            tinted = weight * cloud.colors[fp.index, ch][:, None, None]
            image[ch] += np.bincount(pixels, weights=tinted.ravel(), minlength=h * w)
    return Rasterization(image=image.T.reshape(h, w, c), footprints=footprints, count=len(cloud))


def render(cloud: GaussianCloud, h: int, w: int) -> np.ndarray:
    """Additive splat of every primitive onto an (h, w, C) raster."""
    return rasterize(cloud, h, w).image


def render_backward(cloud: GaussianCloud, grad_image,
                    raster: Optional[Rasterization] = None) -> Dict[str, np.ndarray]:
    """
    Gradients of sum(grad_image * render(cloud)) for every parameter class.

    Args:
        cloud: Primitives that were rendered
        grad_image: dLoss/dPixel of shape (h, w, C)
        raster: Result of rasterize(cloud, h, w) to reuse; recomputed when omitted

    Returns:
        Dict keyed by PARAM_NAMES with arrays shaped like the parameters
    """
    grad_image = np.asarray(grad_image, dtype=np.float64)
    h, w, c = grad_image.shape
    grads = {name: np.zeros_like(value) for name, value in cloud.params().items()}
    if len(cloud) == 0:
        return grads
    if raster is not None and (raster.shape != (h, w) or raster.count != len(cloud)):
        raise ShapeMismatchError(
            f'rasterization of {raster.count} primitives at {raster.shape} does not match '
            f'{len(cloud)} primitives at {(h, w)}',
            shapes=[raster.shape, (h, w)])
    footprints = raster.footprints if raster is not None else _footprints(cloud, h, w)

    flat_grad = grad_image.reshape(h * w, c)
    opacities = cloud.opacities
    scales = cloud.scales
    for fp in footprints:
        idx = fp.index
        # Padding gathers pixel 0; every term below carries a zero density factor there.
        g_pix = flat_grad[fp.flat]                                            # (n, Ky, Kx, C)
        a = opacities[idx]
        colors = cloud.colors[idx]

        # dL/dcolor and dL/dopacity from the linear dependence on the density
        weighted = np.einsum('nyxc,nyx->nc', g_pix, fp.density)
        grads['colors'][idx] = a[:, None] * weighted
        d_alpha = np.einsum('nc,nc->n', weighted, colors)
        grads['opacity_logits'][idx] = d_alpha * a * (1.0 - a)

        # dL/dq with G = exp(-q/2)
        d_q = np.einsum('nyxc,nc->nyx', g_pix, colors)
        d_q *= fp.density * (-0.5 * a)[:, None, None]

        s1 = scales[idx, 0][:, None, None]
        s2 = scales[idx, 1][:, None, None]
        dq_du1 = 2.0 * fp.u1 / s1 ** 2
        dq_du2 = 2.0 * fp.u2 / s2 ** 2
        cos = np.cos(cloud.rotations[idx])[:, None, None]
        sin = np.sin(cloud.rotations[idx])[:, None, None]

        # u = R^T (p - mu): du1/dmx = -cos, du2/dmx = sin, du1/dmy = -sin, du2/dmy = -cos
        grads['means'][idx, 0] = np.einsum('nyx,nyx->n', d_q, -cos * dq_du1 + sin * dq_du2)
        grads['means'][idx, 1] = np.einsum('nyx,nyx->n', d_q, -sin * dq_du1 - cos * dq_du2)

        grads['log_scales'][idx, 0] = -np.einsum('nyx,nyx->n', d_q, fp.u1 * dq_du1)
        grads['log_scales'][idx, 1] = -np.einsum('nyx,nyx->n', d_q, fp.u2 * dq_du2)

        # du1/dtheta = u2, du2/dtheta = -u1
        d_theta = fp.u2 * dq_du1 - fp.u1 * dq_du2
        grads['rotations'][idx] = np.einsum('nyx,nyx->n', d_q, d_theta)
    return grads


def _check_pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f'image shapes differ: {a.shape} vs {b.shape}', shapes=[a.shape, b.shape])
    return a, b


def _window(x: np.ndarray) -> np.ndarray:
    # Zero-padded 11x11 Gaussian window per channel; the kernel is symmetric,
    # so this operator is its own adjoint.
    return gaussian_filter(x, sigma=(SSIM_SIGMA, SSIM_SIGMA, 0.0), mode='constant', cval=0.0,
                           truncate=SSIM_RADIUS / SSIM_SIGMA)


@dataclass
class _SSIMStats:
    mx: np.ndarray
    my: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    value: np.ndarray


def _ssim_stats(x: np.ndarray, y: np.ndarray) -> _SSIMStats:
    mx, my = _window(x), _window(y)
    sxx = _window(x * x) - mx * mx
    syy = _window(y * y) - my * my
    sxy = _window(x * y) - mx * my
    a1 = 2.0 * mx * my + SSIM_C1
    a2 = 2.0 * sxy + SSIM_C2
    b1 = mx * mx + my * my + SSIM_C1
    b2 = sxx + syy + SSIM_C2
    return _SSIMStats(mx=mx, my=my, a1=a1, a2=a2, b1=b1, b2=b2, value=(a1 * a2) / (b1 * b2))


def _ssim_grad(x: np.ndarray, y: np.ndarray, stats: _SSIMStats, upstream: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. x of sum(upstream * ssim_map(x, y))."""
    s, d = stats.value, stats.b1 * stats.b2
    d_mx = (2.0 * stats.my * stats.a2 - 2.0 * stats.my * stats.a1) / d \
        - s * (2.0 * stats.mx / stats.b1 - 2.0 * stats.mx / stats.b2)
    d_exy = 2.0 * s / stats.a2
    d_exx = -s / stats.b2
    return (_window(upstream * d_mx)
            + 2.0 * x * _window(upstream * d_exx)
            + y * _window(upstream * d_exy))


def ssim_map(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return _ssim_stats(a, b).value


def ssim(a, b) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5, unit dynamic range)."""
    return float(ssim_map(a, b).mean())


def psnr(a, b) -> float:
    """PSNR for unit dynamic range, capped at 99 dB for near-identical images."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-10:
        return PSNR_CAP
    return 10.0 * math.log10(1.0 / mse)


def recon_loss(rendered, target, lam: float = 0.2) -> float:
    """(1 - lam) * L1 + lam * (1 - SSIM) / 2."""
    return recon_loss_grad(rendered, target, lam)[0]


def recon_loss_grad(rendered, target, lam: float = 0.2) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Reconstruction loss with its gradients.

    Returns:
        (loss, dLoss/dRendered, dLoss/dTarget)
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f'lambda must lie in [0, 1], got {lam}')
    x, y = _check_pair(rendered, target)
    n = x.size

    diff = x - y
    l1 = float(np.abs(diff).mean())
    d_l1 = np.sign(diff) / n

    stats = _ssim_stats(x, y)
    d_ssim = (1.0 - float(stats.value.mean())) / 2.0
    upstream = np.full(x.shape, -0.5 / n)
    d_x_ssim = _ssim_grad(x, y, stats, upstream)
    # SSIM is symmetric in its arguments, so the target side swaps roles.
    swapped = _SSIMStats(mx=stats.my, my=stats.mx, a1=stats.a1, a2=stats.a2,
                         b1=stats.b1, b2=stats.b2, value=stats.value)
    d_y_ssim = _ssim_grad(y, x, swapped, upstream)

    loss = (1.0 - lam) * l1 + lam * d_ssim
    d_rendered = (1.0 - lam) * d_l1 + lam * d_x_ssim
    d_target = -(1.0 - lam) * d_l1 + lam * d_y_ssim
    return loss, d_rendered, d_target


def accumulate_densify_stats(cloud: GaussianCloud, grads: Dict[str, np.ndarray],
                             shape: Optional[Tuple[int, int]] = None,
                             visible: Optional[np.ndarray] = None) -> None:
    """
    Add this iteration's positional-gradient magnitudes to the accumulators.

    With `shape` = (h, w) the gradient is taken with respect to normalized
    device coordinates (x in [-1, 1] across w pixels, y across h), as 3DGS
    measures its screen-space gradient. A Gaussian's pixel-space gradient
    shrinks like 1/size for a fixed n0, so this keeps one grad_threshold
    meaningful across raster sizes. Without `shape` the raw pixel-space
    gradient is accumulated.
    """
    means_grad = grads['means']
    if shape is not None:
        h, w = shape
        means_grad = means_grad * np.array([0.5 * w, 0.5 * h])
    norms = np.linalg.norm(means_grad, axis=1)
    if visible is None:
        visible = norms > 0
    cloud.grad_accum[visible] += norms[visible]
    cloud.grad_count[visible] += 1


def densify_and_prune(
    cloud: GaussianCloud,
    grad_threshold: float,
    scale_split_threshold: float,
    opacity_floor: float,
    rng: Optional[np.random.Generator] = None
) -> GaussianCloud:
    """
    Clone small and split large high-gradient primitives, then prune faint ones.

    Args:
        cloud: Cloud to densify; it is not modified
        grad_threshold: Mean positional-gradient magnitude above which a primitive densifies
        scale_split_threshold: Max realized scale (px) at or above which a primitive splits
        opacity_floor: Primitives with sigmoid(opacity_logit) below this are removed
        rng: Generator for split sampling (defaults to seed 0)

    Returns:
        New GaussianCloud with reset accumulators and updated peak_count
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    out = cloud.copy()
    before = len(out)

    mean_grads = np.divide(out.grad_accum, out.grad_count,
                           out=np.zeros_like(out.grad_accum), where=out.grad_count > 0)
    selected = mean_grads > grad_threshold
    max_scale = out.scales.max(axis=1) if before else np.zeros(0)
    clone = selected & (max_scale < scale_split_threshold)
    split = selected & ~clone

    params = out.params()
    cloned = {name: value[clone].copy() for name, value in params.items()}

    split_idx = np.flatnonzero(split)
    children = {name: np.repeat(value[split_idx], 2, axis=0) for name, value in params.items()}
    if len(split_idx):
        scales = np.repeat(out.scales[split_idx], 2, axis=0)
        theta = children['rotations']
        samples = rng.standard_normal(scales.shape) * scales
        cos, sin = np.cos(theta), np.sin(theta)
        children['means'] = children['means'] + np.stack(
            [cos * samples[:, 0] - sin * samples[:, 1],
             sin * samples[:, 0] + cos * samples[:, 1]], axis=1)
        children['log_scales'] = children['log_scales'] - math.log(SPLIT_SCALE_DIVISOR)

    out._append(cloned)
    out._append(children)
    keep = np.ones(len(out), dtype=bool)
    keep[split_idx] = False
    out._keep(keep)
    densified = len(out)

    pruned_mask = out.opacities < opacity_floor
    out._keep(~pruned_mask)

    out.grad_accum = np.zeros(len(out))
    out.grad_count = np.zeros(len(out), dtype=np.int64)
    out.peak_count = max(out.peak_count, len(out))

    logger.debug(
        f'Densify: {before} -> {len(out)} primitives '
        f'(cloned {int(clone.sum())}, split {len(split_idx)}, pruned {int(pruned_mask.sum())}, '
        f'max before prune {densified})'
    )
    return out


def expon_lr(step: int, lr_init: float, lr_final: float, max_steps: int) -> float:
    """Log-linear interpolation from lr_init to lr_final over max_steps."""
    if max_steps <= 0 or lr_init == lr_final:
        return lr_init
    t = min(max(step / max_steps, 0.0), 1.0)
    return math.exp(math.log(lr_init) * (1.0 - t) + math.log(lr_final) * t)


def adam_step(cloud: GaussianCloud, grads: Dict[str, np.ndarray], lrs: Dict[str, float]) -> None:
    """One in-place Adam update with a learning rate per parameter class."""
    beta1, beta2 = ADAM_BETAS
    cloud.step += 1
    bias1 = 1.0 - beta1 ** cloud.step
    bias2 = 1.0 - beta2 ** cloud.step
    for name in PARAM_NAMES:
        grad = grads[name]
        m = cloud.exp_avg[name] = beta1 * cloud.exp_avg[name] + (1.0 - beta1) * grad
        v = cloud.exp_avg_sq[name] = beta2 * cloud.exp_avg_sq[name] + (1.0 - beta2) * grad * grad
        update = lrs[name] * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
        setattr(cloud, name, getattr(cloud, name) - update)
