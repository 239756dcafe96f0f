"""
Command-line surface.

    python cli.py modulate INPUT.png --levels 3 --alpha 0 0.5 1 --out frames/
    python cli.py prcheck --mode scale --alpha 0.5
    python cli.py train TARGET.png --config run.conf --out runs/a
    python cli.py ablate TARGETS_DIR --config sweep.conf --out runs/sweep --jobs 4

Exit codes: 0 success, 1 diagnostic failure, 2 bad input.
"""
import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from config import SweepConfig, TrainConfig, get_config, load_config_file, with_overrides
from curriculum import ablate, summarize, train
from filterbank import Mode, haar_bank, pr_grad, pr_loss, pr_terms
from logger_config import get_logger, set_level
from services.manifest_service import ManifestService
from services.png_service import PngService
from services.report_service import ReportService
from transform import decompose, dwt_forward, modulate
from utils.decorators import EXIT_BAD_INPUT, cli_command
from utils.exceptions import DiagnosticFailure, ImageReadError

logger = get_logger(__name__)

PR_TOLERANCE = 1e-12
PRCHECK_OUT = 'runs/prcheck'


def _fmt(value: float) -> str:
    # Rounded to 12 digits; adding 0.0 turns -0.0 into 0.0.
    return repr(round(float(value), 12) + 0.0)


def _display_detail(band: np.ndarray) -> np.ndarray:
    peak = float(np.abs(band).max())
    return np.full_like(band, 0.5) if peak == 0.0 else 0.5 + band / (2.0 * peak)


def subband_grid(ll: np.ndarray, lh: np.ndarray, hl: np.ndarray, hh: np.ndarray, level: int) -> np.ndarray:
    """2x2 display grid [[LL, LH], [HL, HH]]; LL rescaled to image range, details contrast-normalized."""
    top = np.concatenate([ll / 2 ** level, _display_detail(lh)], axis=1)
    bottom = np.concatenate([_display_detail(hl), _display_detail(hh)], axis=1)
    return np.clip(np.concatenate([top, bottom], axis=0), 0.0, 1.0)


def _load_train_config(config_path: Optional[str], sections=(TrainConfig,)):
    if config_path is None:
        return tuple(cls() for cls in sections)
    return load_config_file(config_path, sections)


@cli_command
def cmd_modulate(input_png: str, levels: int, alpha_list: Sequence[float], out_dir: str,
                 subbands: bool = False) -> int:
    """Write modulate(image) for every alpha, optionally with subband grids."""
    started = time.perf_counter()
    png = PngService()
    image, crop = png.read_cropped(input_png, levels)
    out = Path(out_dir)
    outputs: List[str] = []

    for index, alpha in enumerate(alpha_list):
        bank = haar_bank(Mode.SCALE, alpha)
        frame = modulate(image, bank, levels)
        name = f'frame_{index:02d}_alpha_{alpha:g}.png'
        png.write(out / name, frame)
        outputs.append(name)

        if subbands:
            pyramid = decompose(image, bank, levels)
            approx = image
            for level, (lh, hl, hh) in enumerate(pyramid.details, start=1):
                approx = dwt_forward(approx, bank).ll
                grid_name = f'subbands_alpha_{alpha:g}_level{level}.png'
                png.write(out / grid_name, subband_grid(approx, lh, hl, hh, level))
                enlarged = np.repeat(np.repeat(approx / 2 ** level, 2 ** level, axis=0), 2 ** level, axis=1)
                ll_name = f'll_alpha_{alpha:g}_level{level}.png'
                png.write(out / ll_name, np.clip(enlarged, 0.0, 1.0))
                outputs.extend([grid_name, ll_name])

    ManifestService(out).write(
        command='modulate',
        config={'levels': levels, 'alpha_list': list(alpha_list), 'subbands': subbands},
        inputs=[str(input_png)], outputs=outputs, seed=None,
        duration_s=time.perf_counter() - started, extra={'crop': list(crop)},
    )
    return 0


@cli_command
def cmd_prcheck(mode: str = 'scale', alpha: float = 0.0, out_dir: str = PRCHECK_OUT) -> int:
    """
    Print PR residual norms, loss and gradient; exit 0 only when PR holds.

    The manifest goes to out_dir (runs/prcheck unless --out is given)
    before the exit code is decided.
    """
    started = time.perf_counter()
    mode = Mode.parse(mode)
    bank = haar_bank(mode, alpha)
    if mode is Mode.WHOLE:
        bank = bank.with_hi_free(alpha * bank.hi_a_base)

    alias, dist = pr_terms(bank)
    loss = pr_loss(bank)
    grad = pr_grad(bank)
    print(f'alias_residual_norm2 = {_fmt(alias)}')
    print(f'distortion_residual_norm2 = {_fmt(dist)}')
    print(f'pr_loss = {_fmt(loss)}')
    if mode is Mode.SCALE:
        print(f'dpr_dalpha = {_fmt(grad.alpha)}')
    else:
        print(f'dpr_dtaps = {", ".join(_fmt(g) for g in grad.hi_a_free)}')

    ManifestService(out_dir).write(
        command='prcheck', config={'mode': mode.value, 'alpha': alpha},
        inputs=[], outputs=[], seed=None, duration_s=time.perf_counter() - started,
        extra={'pr_loss': loss},
    )
    if loss >= PR_TOLERANCE:
        raise DiagnosticFailure(f'PR does not hold: pr_loss = {loss!r}')
    return 0


@cli_command
def cmd_train(config_file: Optional[str], target_png: str, out_dir: str, seed: Optional[int] = None,
              levels: Optional[int] = None, mode: Optional[str] = None) -> int:
    """Train on one target; write metrics.csv, render.png and the manifest."""
    started = time.perf_counter()
    (config,) = _load_train_config(config_file)
    config = with_overrides(config, seed=seed, levels=levels,
                            mode=Mode.parse(mode) if mode is not None else None)

    png = PngService()
    target, crop = png.read_cropped(target_png, config.levels)
    report = train(config, target)

    out = Path(out_dir)
    ReportService(out).write_metrics(report)
    outputs = ['metrics.csv']
    if report.final_render is not None:
        png.write(out / 'render.png', report.final_render)
        outputs.append('render.png')

    ManifestService(out).write(
        command='train', config=config.as_dict(),
        inputs=[str(target_png)] + ([str(config_file)] if config_file else []),
        outputs=outputs, seed=config.seed, duration_s=time.perf_counter() - started,
        extra={'crop': list(crop), 'peak_gaussians': report.peak_count},
    )
    return 0


@cli_command
def cmd_ablate(config_file: Optional[str], targets_dir: str, out_dir: str, jobs: Optional[int] = None,
               seeds: Optional[Sequence[int]] = None, levels: Optional[Sequence[int]] = None,
               modes: Optional[Sequence[str]] = None) -> int:
    """Run the levels x mode x seed sweep over every PNG in targets_dir."""
    started = time.perf_counter()
    config, sweep = _load_train_config(config_file, (TrainConfig, SweepConfig))
    sweep = SweepConfig(
        sweep_levels=list(levels) if levels else sweep.sweep_levels,
        sweep_modes=list(modes) if modes else sweep.sweep_modes,
        sweep_seeds=list(seeds) if seeds else sweep.sweep_seeds,
    )
    jobs = jobs or get_config().ablate_jobs

    png = PngService()
    paths = png.list_pngs(targets_dir)
    if not paths:
        raise ImageReadError(f'no PNG targets in {targets_dir}', path=str(targets_dir))

    depth = max(sweep.sweep_levels)
    targets, unreadable = {}, []
    for path in paths:
        try:
            targets[path.stem], _ = png.read_cropped(path, depth)
        except ImageReadError:
            unreadable.append(str(path))
    if unreadable:
        raise ImageReadError(f'unreadable targets: {", ".join(unreadable)}', path=unreadable[0])

    rows = ablate(config, targets, sweep.sweep_levels, sweep.sweep_modes, sweep.sweep_seeds, jobs=jobs)
    summary = summarize(rows)

    out = Path(out_dir)
    ReportService(out).write_ablation(rows, summary)
    ManifestService(out).write(
        command='ablate', config={**config.as_dict(), **sweep.as_dict()},
        inputs=[str(p) for p in paths] + ([str(config_file)] if config_file else []),
        outputs=['ablation.csv'], seed=None, duration_s=time.perf_counter() - started,
        extra={'jobs': jobs, 'runs': len(rows)},
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='cli.py', description='Learnable multi-level DWT curriculum tools.')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'])
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('modulate', help='write modulated frames for a list of alpha values')
    p.add_argument('input_png')
    p.add_argument('--levels', type=int, default=1)
    p.add_argument('--alpha', type=float, nargs='+', default=[0.0, 0.5, 1.0], dest='alpha_list')
    p.add_argument('--out', required=True, dest='out_dir')
    p.add_argument('--subbands', action='store_true', help='also write per-level subband grids')

    p = commands.add_parser('prcheck', help='print Perfect Reconstruction diagnostics')
    p.add_argument('--mode', choices=[m.value for m in Mode], default=Mode.SCALE.value)
    p.add_argument('--alpha', type=float, default=0.0)
    p.add_argument('--out', dest='out_dir', default=PRCHECK_OUT)

    p = commands.add_parser('train', help='train one curriculum run')
    p.add_argument('target_png')
    p.add_argument('--config', dest='config_file')
    p.add_argument('--out', required=True, dest='out_dir')
    p.add_argument('--seed', type=int)
    p.add_argument('--levels', type=int)
    p.add_argument('--mode', choices=[m.value for m in Mode])

    p = commands.add_parser('ablate', help='sweep levels, modes and seeds over a directory of targets')
    p.add_argument('targets_dir')
    p.add_argument('--config', dest='config_file')
    p.add_argument('--out', required=True, dest='out_dir')
    p.add_argument('--jobs', type=int)
    p.add_argument('--seed', type=int, nargs='+', dest='seeds')
    p.add_argument('--levels', type=int, nargs='+')
    p.add_argument('--mode', choices=[m.value for m in Mode], nargs='+', dest='modes')
    return parser


COMMANDS = {
    'modulate': cmd_modulate,
    'prcheck': cmd_prcheck,
    'train': cmd_train,
    'ablate': cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    try:
        runtime = get_config()
    except ValueError as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_BAD_INPUT
    set_level(args.pop('log_level') or runtime.log_level)
    command = COMMANDS[args.pop('command')]
    return command(**args)


if __name__ == '__main__':
    sys.exit(main())
