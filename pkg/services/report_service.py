"""
Report service for CSV metric files.

CSV rules: '.' decimal separator, no thousands separators, LF line endings,
floats written with repr() so reruns are byte-identical.
"""
import csv
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

import numpy as np

from curriculum import AblationRow, AblationSummary, TrainReport
from logger_config import get_logger

logger = get_logger(__name__)

METRICS_HEADER = ['iter', 'loss_total', 'loss_recon', 'loss_pr', 'alpha', 'num_gaussians', 'psnr', 'ssim']
ABLATION_HEADER = ['target', 'levels', 'mode', 'seed', 'peak_gaussians', 'final_psnr', 'final_ssim',
                   'final_alpha']
SUMMARY_TARGET = 'MEAN'
SUMMARY_SEED = 'all'


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return 'nan' if math.isnan(value) else repr(value)
    return str(value)


class ReportService:
    """Service for writing training and ablation CSVs."""

    def __init__(self, out_dir: Union[str, Path]) -> None:
        self.out_dir: Path = Path(out_dir)

    def _write_rows(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        count = 0
        with path.open('w', encoding='utf-8', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
                count += 1
        logger.info(f'Wrote {count} rows to {path}')
        return path

    def write_metrics(self, report: TrainReport, name: str = 'metrics.csv') -> Path:
        rows = (
            [r.iter, r.loss_total, r.loss_recon, r.loss_pr, r.alpha, r.gaussian_count, r.psnr, r.ssim]
            for r in report.rows
        )
        return self._write_rows(name, METRICS_HEADER, rows)

    def write_ablation(self, rows: List[AblationRow], summary: List[AblationSummary],
                       name: str = 'ablation.csv') -> Path:
        data = [
            [r.target, r.levels, r.mode, r.seed, r.peak_gaussians, r.final_psnr, r.final_ssim, r.final_alpha]
            for r in rows
        ]
        means = [
            [SUMMARY_TARGET, s.levels, s.mode, SUMMARY_SEED, s.peak_gaussians, s.final_psnr, s.final_ssim,
             s.final_alpha]
            for s in summary
        ]
        return self._write_rows(name, ABLATION_HEADER, data + means)
