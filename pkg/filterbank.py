"""
Two-channel analysis/synthesis filter bank with a learnable high-pass.

Taps are stored as 1D float arrays indexed by delay, so the same array is
read as the coefficient list of a polynomial in z^-1. The Perfect
Reconstruction (PR) conditions used here are the standard two-channel ones:

    alias:       L~(z) L(-z) + H~(z) H(-z) = 0
    distortion:  L~(z) L(z)  + H~(z) H(z)  = 2 z^-d,   d = taps - 1

where H is the effective analysis high-pass (alpha * h in scale mode,
the free taps in whole mode). Both residuals are affine in H, so the
PR loss is a quadratic and its gradient is computed in closed form.
"""
import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from logger_config import get_logger
from utils.exceptions import ModeMismatchError

logger = get_logger(__name__)

HAAR_TAP = 1.0 / math.sqrt(2.0)

TapsLike = Union[np.ndarray, Iterable[float]]


class Mode(str, Enum):
    """Which high-pass parameterization is learnable."""

    SCALE = 'scale'
    WHOLE = 'whole'

    @classmethod
    def parse(cls, value: Union[str, 'Mode']) -> 'Mode':
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = ', '.join(m.value for m in cls)
            raise ValueError(f'mode must be one of {{{valid}}}, got: {value!r}')


def as_taps(values: TapsLike) -> np.ndarray:
    """Return a read-only float64 copy of `values` after validating it."""
    taps = np.array(values, dtype=np.float64).reshape(-1)
    if taps.size < 1:
        raise ValueError('filter taps must contain at least one coefficient')
    if not np.all(np.isfinite(taps)):
        raise ValueError(f'filter taps must be finite, got: {taps.tolist()}')
    taps.setflags(write=False)
    return taps


@dataclass(frozen=True)
class FilterBank:
    """Frozen Haar-style bank plus its learnable high-pass state.

    Instances are immutable snapshots; updates go through with_alpha /
    with_hi_free which return a new bank.
    """

    lo_a: np.ndarray
    hi_a_base: np.ndarray
    lo_s: np.ndarray
    hi_s: np.ndarray
    mode: Mode = Mode.SCALE
    alpha: float = 1.0
    hi_a_free: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        for name in ('lo_a', 'hi_a_base', 'lo_s', 'hi_s'):
            object.__setattr__(self, name, as_taps(getattr(self, name)))
        object.__setattr__(self, 'mode', Mode.parse(self.mode))
        object.__setattr__(self, 'alpha', float(self.alpha))

        lengths = {len(self.lo_a), len(self.hi_a_base), len(self.lo_s), len(self.hi_s)}
        if len(lengths) != 1:
            raise ValueError(f'all fixed tap sequences must share one length, got {sorted(lengths)}')

        if self.mode is Mode.WHOLE:
            free = np.zeros(self.taps) if self.hi_a_free is None else self.hi_a_free
            free = as_taps(free)
            if len(free) != self.taps:
                raise ValueError(f'hi_a_free needs {self.taps} taps, got {len(free)}')
            object.__setattr__(self, 'hi_a_free', free)
        elif self.hi_a_free is not None:
            raise ModeMismatchError('hi_a_free is only used in whole mode', mode=self.mode.value)

        if not math.isfinite(self.alpha):
            raise ValueError(f'alpha must be finite, got {self.alpha}')

    @property
    def taps(self) -> int:
        return len(self.lo_a)

    @property
    def delay(self) -> int:
        return self.taps - 1

    @property
    def hi_a(self) -> np.ndarray:
        """Effective analysis high-pass."""
        if self.mode is Mode.WHOLE:
            return self.hi_a_free
        return self.alpha * self.hi_a_base

    @property
    def effective_alpha(self) -> float:
        """Projection of the effective high-pass onto the frozen base.

        Equals alpha in scale mode; gives whole-mode runs a comparable number.
        """
        if self.mode is Mode.SCALE:
            return self.alpha
        base = self.hi_a_base
        return float(np.dot(self.hi_a_free, base) / np.dot(base, base))

    def with_alpha(self, alpha: float) -> 'FilterBank':
        if self.mode is not Mode.SCALE:
            raise ModeMismatchError('alpha is only learnable in scale mode', mode=self.mode.value)
        return dataclasses.replace(self, alpha=alpha)

    def with_hi_free(self, taps: TapsLike) -> 'FilterBank':
        if self.mode is not Mode.WHOLE:
            raise ModeMismatchError('free high-pass taps only exist in whole mode', mode=self.mode.value)
        return dataclasses.replace(self, hi_a_free=as_taps(taps))


@dataclass(frozen=True)
class PRGradient:
    """Gradient of pr_loss; exactly one field is set, depending on mode."""

    alpha: Optional[float] = None
    hi_a_free: Optional[np.ndarray] = None


def haar_bank(mode: Union[Mode, str] = Mode.SCALE, init_alpha: float = 0.0) -> FilterBank:
    """
    Build the orthonormal Haar bank.

    Synthesis taps are chosen so both PR residuals vanish when the
    effective high-pass equals the base high-pass (alpha = 1).

    Args:
        mode: Scale learns alpha; whole learns both high-pass taps
        init_alpha: Initial alpha (scale mode only)

    Returns:
        FilterBank
    """
    s = HAAR_TAP
    mode = Mode.parse(mode)
    kwargs = dict(
        lo_a=[s, s],
        hi_a_base=[s, -s],
        lo_s=[s, s],
        hi_s=[-s, s],
        mode=mode,
    )
    if mode is Mode.WHOLE:
        return FilterBank(**kwargs, hi_a_free=np.zeros(2))
    return FilterBank(**kwargs, alpha=init_alpha)


def poly_conv(a: TapsLike, b: TapsLike) -> np.ndarray:
    """Coefficients of the product of two polynomials in z^-1."""
    return np.convolve(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def alternate_signs(a: TapsLike) -> np.ndarray:
    """Substitute z -> -z: the coefficient at delay n is multiplied by (-1)^n."""
    a = np.asarray(a, dtype=np.float64)
    signs = np.where(np.arange(a.size) % 2 == 0, 1.0, -1.0)
    return a * signs


def _impulse(length: int, delay: int, gain: float = 2.0) -> np.ndarray:
    target = np.zeros(length)
    target[delay] = gain
    return target


def alias_residual(bank: FilterBank) -> np.ndarray:
    """L~(z) L(-z) + H~(z) H(-z); all zeros iff aliasing cancels."""
    return (poly_conv(bank.lo_s, alternate_signs(bank.lo_a))
            + poly_conv(bank.hi_s, alternate_signs(bank.hi_a)))


def dist_residual(bank: FilterBank) -> np.ndarray:
    """L~(z) L(z) + H~(z) H(z) - 2 z^-d; all zeros iff the cascade is a pure delay."""
    transfer = poly_conv(bank.lo_s, bank.lo_a) + poly_conv(bank.hi_s, bank.hi_a)
    return transfer - _impulse(transfer.size, bank.delay)


def pr_terms(bank: FilterBank) -> Tuple[float, float]:
    """Squared L2 norms of the alias and distortion residuals."""
    alias = alias_residual(bank)
    dist = dist_residual(bank)
    return float(np.dot(alias, alias)), float(np.dot(dist, dist))


def pr_loss(bank: FilterBank) -> float:
    """Sum of both squared residual norms. Computed once per bank (levels share it)."""
    alias, dist = pr_terms(bank)
    return alias + dist


def _hi_a_gradient(bank: FilterBank) -> np.ndarray:
    # Each residual is c + M h where M convolves with hi_s (after the z -> -z
    # substitution for the alias term), so dL/dh = 2 M^T r, a correlation.
    alias = alias_residual(bank)
    dist = dist_residual(bank)
    from_dist = np.correlate(dist, bank.hi_s, mode='valid')
    from_alias = alternate_signs(np.correlate(alias, bank.hi_s, mode='valid'))
    return 2.0 * (from_dist + from_alias)


def pr_grad(bank: FilterBank) -> PRGradient:
    """
    Analytic gradient of pr_loss.

    Returns:
        PRGradient with `alpha` set in scale mode, `hi_a_free` in whole mode
    """
    grad_h = _hi_a_gradient(bank)
    if bank.mode is Mode.SCALE:
        return PRGradient(alpha=float(np.dot(grad_h, bank.hi_a_base)))
    return PRGradient(hi_a_free=grad_h)
