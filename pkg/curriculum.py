"""
Coarse-to-fine training: the splat trainer fits a wavelet-modulated target
while a Perfect Reconstruction penalty (and, by default, the reconstruction
loss itself) drives the high-pass scale from 0 toward 1.

The wavelet parameters use plain gradient descent with step alpha_lr so that
the PR-only trajectory has the closed form 1 - a_t = (1 - a_0)(1 - 4 lr lam)^t.
"""
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from more_itertools import map_reduce, unique_everseen

import splat2d
from config import TrainConfig, with_overrides
from filterbank import FilterBank, Mode, haar_bank, pr_grad, pr_loss
from logger_config import get_logger
from transform import as_image, decompose, modulate, modulate_vjp, modulate_vjp_taps

logger = get_logger(__name__)

BASELINE_MODE = 'none'


@dataclass
class TrainRow:
    iter: int
    loss_total: float
    loss_recon: float
    loss_pr: float
    alpha: float
    gaussian_count: int
    psnr: float
    ssim: float


@dataclass
class TrainReport:
    """Per-iteration rows plus end-of-run state."""

    rows: List[TrainRow] = field(default_factory=list)
    final_alpha: float = 0.0
    final_psnr: float = math.nan
    final_ssim: float = math.nan
    final_bank: Optional[FilterBank] = None
    final_render: Optional[np.ndarray] = None
    elapsed_seconds: float = 0.0

    @property
    def peak_count(self) -> int:
        return max((row.gaussian_count for row in self.rows), default=0)


def _step_bank(bank: FilterBank, config: TrainConfig, iteration: int, target: np.ndarray,
               target_grad: Optional[np.ndarray]) -> FilterBank:
    apply_pr = (iteration - 1) % config.pr_stride == 0
    coupled = not config.pr_only and target_grad is not None
    grad = pr_grad(bank)

    if bank.mode is Mode.SCALE:
        total = config.lambda_pr * grad.alpha if apply_pr else 0.0
        if coupled:
            total += modulate_vjp(target, bank, config.levels, target_grad)
        return bank.with_alpha(bank.alpha - config.alpha_lr * total)

    total = config.lambda_pr * grad.hi_a_free if apply_pr else np.zeros(bank.taps)
    if coupled:
        total = total + modulate_vjp_taps(target, bank, config.levels, target_grad)
    return bank.with_hi_free(bank.hi_a_free - config.alpha_lr * total)


def _learning_rates(config: TrainConfig, diagonal: float, iteration: int) -> Dict[str, float]:
    lr_means = config.lr_means * diagonal
    return {
        'means': splat2d.expon_lr(iteration, lr_means, lr_means * config.lr_means_final_frac,
                                  config.iterations),
        'log_scales': config.lr_scales,
        'rotations': config.lr_rotation,
        'colors': config.lr_colors,
        'opacity_logits': config.lr_opacity,
    }


def _densify_due(config: TrainConfig, iteration: int) -> bool:
    return (config.densify_from <= iteration <= config.densify_until
            and iteration % config.densify_interval == 0)


def train(config: TrainConfig, target) -> TrainReport:
    """
    Run one curriculum training.

    Each iteration modulates the target with the current bank, takes one
    Adam step on the primitives, one gradient step on the wavelet
    parameters and densifies on schedule.

    Args:
        config: Hyperparameters; levels = 0 trains on the raw target
        target: (H, W, C) image in [0, 1]

    Returns:
        TrainReport with one row per iteration
    """
    target = as_image(target)
    h, w, _ = target.shape
    if config.levels > 0:
        decompose(target, haar_bank(config.mode), config.levels)

    bank = haar_bank(config.mode, config.init_alpha)
    cloud = splat2d.init_cloud(target, config.n0, config.seed)
    split_rng = np.random.default_rng([config.seed, 1])
    diagonal = math.hypot(h, w)
    report = TrainReport()
    started = time.perf_counter()

    logger.info(
        f'Training {config.iterations} iterations on {h}x{w} target: levels={config.levels} '
        f'mode={config.mode.value} n0={config.n0} seed={config.seed} pr_only={config.pr_only}'
    )

    for iteration in range(1, config.iterations + 1):
        loss_pr = pr_loss(bank)
        loss_recon = 0.0
        target_grad = None
        quality = (math.nan, math.nan)

        if config.splat:
            modulated = modulate(target, bank, config.levels) if config.levels > 0 else target
            raster = splat2d.rasterize(cloud, h, w)
            rendered = raster.image
            loss_recon, render_grad, target_grad = splat2d.recon_loss_grad(
                rendered, modulated, config.lambda_ssim)
            quality = (splat2d.psnr(rendered, target), splat2d.ssim(rendered, target))

        loss_total = loss_recon + config.lambda_pr * loss_pr if config.levels > 0 else loss_recon
        report.rows.append(TrainRow(
            iter=iteration, loss_total=loss_total, loss_recon=loss_recon, loss_pr=loss_pr,
            alpha=bank.effective_alpha, gaussian_count=len(cloud), psnr=quality[0], ssim=quality[1],
        ))

        if config.splat:
            grads = splat2d.render_backward(cloud, render_grad, raster)
            splat2d.accumulate_densify_stats(cloud, grads, (h, w))
            splat2d.adam_step(cloud, grads, _learning_rates(config, diagonal, iteration))

        if config.levels > 0:
            bank = _step_bank(bank, config, iteration, target, target_grad)

        if config.splat and _densify_due(config, iteration):
            cloud = splat2d.densify_and_prune(
                cloud, config.densify_grad_threshold, config.scale_split_threshold,
                config.opacity_floor, rng=split_rng)

        if iteration % config.log_every == 0:
            logger.info(
                f'iter {iteration}: loss={loss_total:.6f} recon={loss_recon:.6f} pr={loss_pr:.6f} '
                f'alpha={bank.effective_alpha:.6f} gaussians={len(cloud)}'
            )

    report.final_bank = bank
    report.final_alpha = bank.effective_alpha
    if config.splat:
        report.final_render = splat2d.render(cloud, h, w)
        report.final_psnr = splat2d.psnr(report.final_render, target)
        report.final_ssim = splat2d.ssim(report.final_render, target)
    report.elapsed_seconds = time.perf_counter() - started

    logger.info(
        f'Finished: peak={report.peak_count} final_psnr={report.final_psnr:.3f} '
        f'final_alpha={report.final_alpha:.6f} in {report.elapsed_seconds:.1f}s'
    )
    return report


@dataclass(frozen=True)
class RunSpec:
    target: str
    levels: int
    mode: str
    seed: int


@dataclass
class AblationRow:
    target: str
    levels: int
    mode: str
    seed: int
    peak_gaussians: int
    final_psnr: float
    final_ssim: float
    final_alpha: float


@dataclass
class AblationSummary:
    levels: int
    mode: str
    runs: int
    peak_gaussians: float
    final_psnr: float
    final_ssim: float
    final_alpha: float


def sweep_specs(targets: Sequence[str], levels_set: Sequence[int], modes: Sequence[Mode],
                seeds: Sequence[int]) -> List[RunSpec]:
    """Cartesian sweep; levels 0 ignores the mode axis and appears once per target and seed."""
    if not targets or not levels_set or not modes or not seeds:
        raise ValueError('ablation sweeps must be non-empty')
    specs = (
        RunSpec(target=name, levels=levels,
                mode=BASELINE_MODE if levels == 0 else Mode.parse(mode).value, seed=seed)
        for name in targets
        for levels in levels_set
        for mode in modes
        for seed in seeds
    )
    return list(unique_everseen(specs))


def _run_spec(payload: Tuple[TrainConfig, RunSpec, np.ndarray]) -> AblationRow:
    base, spec, image = payload
    mode = base.mode if spec.mode == BASELINE_MODE else Mode.parse(spec.mode)
    config = with_overrides(base, levels=spec.levels, mode=mode, seed=spec.seed)
    report = train(config, image)
    return AblationRow(
        target=spec.target, levels=spec.levels, mode=spec.mode, seed=spec.seed,
        peak_gaussians=report.peak_count, final_psnr=report.final_psnr,
        final_ssim=report.final_ssim, final_alpha=report.final_alpha,
    )


def ablate(base: TrainConfig, targets: Mapping[str, np.ndarray], levels_set: Sequence[int],
           modes: Sequence[Mode], seeds: Sequence[int], jobs: int = 1) -> List[AblationRow]:
    """
    Train every (target, levels, mode, seed) combination.

    Args:
        base: Shared hyperparameters; levels, mode and seed are overridden per run
        targets: Name -> image; order is preserved in the output
        jobs: Worker processes; 1 runs in-process

    Returns:
        One AblationRow per run, in sweep order
    """
    specs = sweep_specs(list(targets), levels_set, modes, seeds)
    payloads = [(base, spec, targets[spec.target]) for spec in specs]
    logger.info(f'Ablation sweep: {len(specs)} runs on {len(targets)} targets with {jobs} job(s)')

    if jobs <= 1:
        return [_run_spec(payload) for payload in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_spec, payloads))


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def summarize(rows: Sequence[AblationRow]) -> List[AblationSummary]:
    """Per-(levels, mode) means, in order of first appearance."""
    groups = map_reduce(rows, keyfunc=lambda row: (row.levels, row.mode))
    return [
        AblationSummary(
            levels=levels, mode=mode, runs=len(group),
            peak_gaussians=_mean([r.peak_gaussians for r in group]),
            final_psnr=_mean([r.final_psnr for r in group]),
            final_ssim=_mean([r.final_ssim for r in group]),
            final_alpha=_mean([r.final_alpha for r in group]),
        )
        for (levels, mode), group in groups.items()
    ]


def _normalize(image: np.ndarray) -> np.ndarray:
    low, high = image.min(), image.max()
    return (image - low) / (high - low) if high > low else np.zeros_like(image)


def _spectral_noise(rng: np.random.Generator, size: int, amplitude) -> np.ndarray:
    freq = np.hypot(*np.meshgrid(np.fft.fftfreq(size), np.fft.fftfreq(size), indexing='ij'))
    channels = []
    for _ in range(3):
        spectrum = np.fft.fft2(rng.standard_normal((size, size))) * amplitude(freq)
        channels.append(np.real(np.fft.ifft2(spectrum)))
    return _normalize(np.stack(channels, axis=-1))


def synthetic_targets(size: int = 128, seed: int = 0) -> Dict[str, np.ndarray]:
    """
    Desk-scale corpus of three (size, size, 3) targets in [0, 1].

    band_noise: white noise low-passed at a quarter of Nyquist.
    checker_blob: checkerboard overlaid with a soft colored blob.
    natural: random-phase noise with a 1/f amplitude spectrum.
    """
    rng = np.random.default_rng(seed)

    band = _spectral_noise(rng, size, lambda f: (f <= 0.125).astype(np.float64))

    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    period = max(size // 8, 1)
    checker = ((xx // period + yy // period) % 2)[:, :, None] * np.array([0.6, 0.6, 0.6])
    radius = size / 5.0
    blob = np.exp(-((xx - 0.6 * size) ** 2 + (yy - 0.4 * size) ** 2) / (2 * radius ** 2))
    checker_blob = np.clip(0.2 + checker + blob[:, :, None] * np.array([0.5, 0.1, -0.15]), 0.0, 1.0)

    natural = _spectral_noise(rng, size, lambda f: 1.0 / np.maximum(f, 1.0 / size))

    return {'band_noise': band, 'checker_blob': checker_blob, 'natural': natural}
