"""
2D discrete wavelet transform built from a FilterBank.

Analysis is a stride-2 convolution (window correlation, as deep-learning
frameworks implement it) with the four outer-product kernels. Synthesis is
the matching transposed stride-2 convolution; the synthesis kernel is the
outer product of the time-reversed synthesis taps, which compensates the
bank's group delay d so that reconstruction lines up with the input pixel
for pixel.

Images are numpy arrays of shape (H, W, C). The first factor of every
outer-product kernel acts along rows (the vertical axis).
"""
from dataclasses import dataclass
from typing import List, NamedTuple, Tuple

import numpy as np

from filterbank import FilterBank, Mode
from logger_config import get_logger
from utils.exceptions import (
    IndivisibleDimensionError,
    ModeMismatchError,
    OddDimensionError,
    ShapeMismatchError,
)

logger = get_logger(__name__)


class Subbands(NamedTuple):
    """One DWT level: approximation plus three oriented details."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


class Kernels2D(NamedTuple):
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


@dataclass
class SubbandPyramid:
    """Multi-level decomposition.

    details[k - 1] holds (LH, HL, HH) of level k; approx is the deepest LL.
    """

    details: List[Tuple[np.ndarray, np.ndarray, np.ndarray]]
    approx: np.ndarray
    shape: Tuple[int, int, int]

    @property
    def levels(self) -> int:
        return len(self.details)


def as_image(data) -> np.ndarray:
    """Validate and normalize raster input to a float64 (H, W, C) array."""
    image = np.asarray(data, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3:
        raise ShapeMismatchError(f'expected an (H, W) or (H, W, C) raster, got shape {image.shape}',
                                 shapes=[image.shape])
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise ShapeMismatchError(f'rasters need at least 2x2 pixels, got {image.shape[:2]}',
                                 shapes=[image.shape])
    if not np.all(np.isfinite(image)):
        raise ValueError('raster contains non-finite values')
    return image


def _outer_kernels(lo: np.ndarray, hi: np.ndarray) -> Kernels2D:
    return Kernels2D(
        ll=np.outer(lo, lo),
        lh=np.outer(lo, hi),
        hl=np.outer(hi, lo),
        hh=np.outer(hi, hi),
    )


def kernels2d(bank: FilterBank) -> Kernels2D:
    """Analysis kernels K_LL, K_LH, K_HL, K_HH built from the effective high-pass."""
    return _outer_kernels(bank.lo_a, bank.hi_a)


def synthesis_kernels(bank: FilterBank) -> Kernels2D:
    """Transposed-convolution kernels; tap reversal absorbs the group delay."""
    return _outer_kernels(bank.lo_s[::-1], bank.hi_s[::-1])


def _windows(image: np.ndarray, size: int) -> np.ndarray:
    h, w, c = image.shape
    return image.reshape(h // size, size, w // size, size, c)


def _analyze(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return np.einsum('ipjqc,pq->ijc', _windows(image, kernel.shape[0]), kernel)


def _synthesize(band: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    h, w, c = band.shape
    size = kernel.shape[0]
    blocks = np.einsum('ijc,pq->ipjqc', band, kernel)
    return blocks.reshape(h * size, w * size, c)


def _check_even(image: np.ndarray) -> None:
    h, w = image.shape[:2]
    if h % 2 or w % 2:
        raise OddDimensionError(f'DWT needs even height and width, got {h}x{w}', shape=image.shape)


def dwt_forward(image, bank: FilterBank) -> Subbands:
    """Single-level analysis; each subband is (H/2, W/2, C)."""
    image = as_image(image)
    _check_even(image)
    kernels = kernels2d(bank)
    return Subbands(*(_analyze(image, k) for k in kernels))


def _details_from(image: np.ndarray, kernels: Kernels2D) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _analyze(image, kernels.lh), _analyze(image, kernels.hl), _analyze(image, kernels.hh)


def dwt_inverse(subbands, bank: FilterBank) -> np.ndarray:
    """Single-level synthesis from four equally sized subbands."""
    bands = [np.asarray(b, dtype=np.float64) for b in subbands]
    bands = [b[:, :, None] if b.ndim == 2 else b for b in bands]
    shapes = [b.shape for b in bands]
    if len(bands) != 4 or len(set(shapes)) != 1:
        raise ShapeMismatchError(f'subbands must share one shape, got {shapes}', shapes=shapes)
    kernels = synthesis_kernels(bank)
    return sum(_synthesize(band, k) for band, k in zip(bands, kernels))


def _check_divisible(shape: Tuple[int, ...], levels: int) -> None:
    if levels < 1:
        raise ValueError(f'levels must be >= 1, got {levels}')
    for axis, size in (('height', shape[0]), ('width', shape[1])):
        for level in range(1, levels + 1):
            current = size // 2 ** (level - 1)
            if current % 2:
                raise IndivisibleDimensionError(
                    f'{axis} {size} is not divisible by 2^{levels}: '
                    f'it is {current} (odd) at level {level}',
                    axis=axis, level=level, size=current)


def decompose(image, bank: FilterBank, levels: int) -> SubbandPyramid:
    """Recursively apply the forward DWT to the LL subband."""
    image = as_image(image)
    _check_divisible(image.shape, levels)
    kernels = kernels2d(bank)

    details = []
    approx = image
    for _ in range(levels):
        details.append(_details_from(approx, kernels))
        approx = _analyze(approx, kernels.ll)
    return SubbandPyramid(details=details, approx=approx, shape=image.shape)


def reconstruct(pyramid: SubbandPyramid, bank: FilterBank) -> np.ndarray:
    """Apply the inverse DWT from the deepest level outward."""
    image = pyramid.approx
    for lh, hl, hh in reversed(pyramid.details):
        image = dwt_inverse((image, lh, hl, hh), bank)
    return image


def modulate(image, bank: FilterBank, levels: int) -> np.ndarray:
    """Frequency-modulated image: reconstruct(decompose(image))."""
    return reconstruct(decompose(image, bank, levels), bank)


def modulate_tangent(image, bank: FilterBank, levels: int, direction) -> np.ndarray:
    """
    Directional derivative of modulate along a change of the effective high-pass.

    The LL chain never touches the high-pass, so only the detail kernels
    carry a derivative: d(l x h) = l x dh, d(h x h) = dh x h + h x dh.

    Args:
        image: Input raster
        bank: Filter bank at which the derivative is taken
        levels: DWT depth
        direction: Taps dh, same length as the bank's filters

    Returns:
        Raster of image shape
    """
    image = as_image(image)
    _check_divisible(image.shape, levels)
    dh = np.asarray(direction, dtype=np.float64)
    kernels = kernels2d(bank)
    tangent_kernels = Kernels2D(
        ll=np.zeros_like(kernels.ll),
        lh=np.outer(bank.lo_a, dh),
        hl=np.outer(dh, bank.lo_a),
        hh=np.outer(dh, bank.hi_a) + np.outer(bank.hi_a, dh),
    )

    details = []
    approx = image
    for _ in range(levels):
        details.append(_details_from(approx, tangent_kernels))
        approx = _analyze(approx, kernels.ll)
    tangent = SubbandPyramid(details=details, approx=np.zeros_like(approx), shape=image.shape)
    return reconstruct(tangent, bank)


def modulate_vjp(image, bank: FilterBank, levels: int, cotangent) -> float:
    """Scalar adjoint <cotangent, d modulate / d alpha> (scale mode)."""
    if bank.mode is not Mode.SCALE:
        raise ModeMismatchError('modulate_vjp needs a scale-mode bank; use modulate_vjp_taps',
                                mode=bank.mode.value)
    cotangent = _matching_cotangent(image, cotangent)
    tangent = modulate_tangent(image, bank, levels, bank.hi_a_base)
    return float(np.sum(cotangent * tangent))


def modulate_vjp_taps(image, bank: FilterBank, levels: int, cotangent) -> np.ndarray:
    """Per-tap adjoint <cotangent, d modulate / d h_k> (whole mode)."""
    if bank.mode is not Mode.WHOLE:
        raise ModeMismatchError('modulate_vjp_taps needs a whole-mode bank', mode=bank.mode.value)
    cotangent = _matching_cotangent(image, cotangent)
    grads = np.zeros(bank.taps)
    for k in range(bank.taps):
        unit = np.zeros(bank.taps)
        unit[k] = 1.0
        grads[k] = np.sum(cotangent * modulate_tangent(image, bank, levels, unit))
    return grads


def _matching_cotangent(image, cotangent) -> np.ndarray:
    image = as_image(image)
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if cotangent.ndim == 2:
        cotangent = cotangent[:, :, None]
    if cotangent.shape != image.shape:
        raise ShapeMismatchError(f'cotangent shape {cotangent.shape} != image shape {image.shape}',
                                 shapes=[cotangent.shape, image.shape])
    return cotangent


def block_mean(image, block: int) -> np.ndarray:
    """Replace every block x block tile with its mean."""
    image = as_image(image)
    h, w, c = image.shape
    means = _windows(image, block).mean(axis=(1, 3))
    return np.repeat(np.repeat(means, block, axis=0), block, axis=1).reshape(h, w, c)


def total_variation(image) -> float:
    """Anisotropic total variation summed over channels."""
    image = as_image(image)
    return float(np.abs(np.diff(image, axis=0)).sum() + np.abs(np.diff(image, axis=1)).sum())


def center_crop_to_multiple(image, levels: int) -> Tuple[np.ndarray, Tuple[int, int, int, int]]:
    """
    Center-crop to the largest height and width divisible by 2^levels.

    Returns:
        (cropped image, (top, left, height, width))
    """
    image = as_image(image)
    multiple = 2 ** max(levels, 0)
    h, w = image.shape[:2]
    new_h, new_w = h - h % multiple, w - w % multiple
    if new_h < 2 or new_w < 2:
        raise IndivisibleDimensionError(
            f'{h}x{w} image is too small for {levels} DWT levels',
            axis='height' if new_h < 2 else 'width', level=levels, size=min(h, w))
    top, left = (h - new_h) // 2, (w - new_w) // 2
    if (new_h, new_w) != (h, w):
        logger.info(f'Center-cropped {h}x{w} to {new_h}x{new_w} for {levels} levels')
    return image[top:top + new_h, left:left + new_w], (top, left, new_h, new_w)
