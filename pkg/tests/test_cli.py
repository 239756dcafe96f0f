"""
Integration tests for the command-line surface.
"""
import csv
import json
import os
from unittest.mock import patch

import numpy as np
import pytest

import config
from cli import build_parser, main, subband_grid
from services.png_service import PngService


@pytest.fixture(autouse=True)
def runtime_env():
    """Pin the runtime config so tests never inherit the host's settings."""
    config._config = None
    with patch.dict(os.environ, {'LOG_LEVEL': 'WARNING', 'ABLATE_JOBS': '1'}):
        yield
    config._config = None


def write_png(path, size=16, seed=0, channels=3):
    image = np.random.default_rng(seed).random((size, size, channels))
    PngService().write(path, image)
    return PngService().read(path)


def write_config(path, text):
    path.write_text(text, encoding='utf-8')
    return str(path)


@pytest.mark.unit
class TestParser:
    """Tests for argument parsing."""

    def test_modulate_arguments(self):
        args = build_parser().parse_args(['modulate', 'in.png', '--levels', '3', '--alpha', '0', '1',
                                          '--out', 'frames'])
        assert args.levels == 3
        assert args.alpha_list == [0.0, 1.0]
        assert args.out_dir == 'frames'
        assert args.subbands is False

    def test_rejects_unknown_mode(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(['prcheck', '--mode', 'lattice'])

    def test_subband_grid_shape(self):
        band = np.zeros((4, 4, 3))
        grid = subband_grid(np.ones((4, 4, 3)), band, band, band, level=1)
        assert grid.shape == (8, 8, 3)
        assert np.allclose(grid[:4, :4], 0.5)
        assert np.allclose(grid[4:, 4:], 0.5)


@pytest.mark.integration
class TestPrcheck:
    """Tests for the prcheck command."""

    @pytest.fixture(autouse=True)
    def in_tmp_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)

    def test_passes_at_pr(self, capsys):
        assert main(['prcheck', '--mode', 'scale', '--alpha', '1']) == 0
        out = capsys.readouterr().out
        assert 'pr_loss = 0.0' in out
        assert 'dpr_dalpha = 0.0' in out

    def test_fails_away_from_pr(self, capsys):
        assert main(['prcheck', '--alpha', '0.5']) == 1
        out = capsys.readouterr().out.splitlines()
        assert out == [
            'alias_residual_norm2 = 0.125',
            'distortion_residual_norm2 = 0.375',
            'pr_loss = 0.5',
            'dpr_dalpha = -2.0',
        ]

    def test_whole_mode_prints_tap_gradient(self, capsys):
        assert main(['prcheck', '--mode', 'whole', '--alpha', '0']) == 1
        out = capsys.readouterr().out
        assert 'pr_loss = 2.0' in out
        assert 'dpr_dtaps = ' in out

    def test_writes_manifest(self, tmp_path):
        assert main(['prcheck', '--alpha', '1', '--out', str(tmp_path / 'check')]) == 0
        assert (tmp_path / 'check' / 'manifest.json').is_file()

    def test_writes_default_manifest_without_out(self, tmp_path):
        assert main(['prcheck', '--alpha', '1']) == 0
        manifest = json.loads((tmp_path / 'runs' / 'prcheck' / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['command'] == 'prcheck'
        assert manifest['pr_loss'] == pytest.approx(0.0, abs=1e-12)

    def test_failed_check_still_writes_manifest(self, tmp_path):
        assert main(['prcheck', '--alpha', '0.5']) == 1
        manifest = json.loads((tmp_path / 'runs' / 'prcheck' / 'manifest.json').read_text(encoding='utf-8'))
        assert manifest['pr_loss'] == pytest.approx(0.5)


@pytest.mark.integration
class TestModulate:
    """Tests for the modulate command."""

    def test_frames_and_identity(self, tmp_path):
        source = write_png(tmp_path / 'in.png')
        out = tmp_path / 'frames'
        assert main(['modulate', str(tmp_path / 'in.png'), '--levels', '2', '--alpha', '0', '0.5', '1',
                     '--out', str(out)]) == 0
        frames = sorted(p.name for p in out.glob('frame_*.png'))
        assert frames == ['frame_00_alpha_0.png', 'frame_01_alpha_0.5.png', 'frame_02_alpha_1.png']
        identity = PngService().read(out / 'frame_02_alpha_1.png')
        assert np.max(np.abs(identity - source)) <= 1.0 / 255.0
        assert (out / 'manifest.json').is_file()

    def test_coarse_frame_is_blocky(self, tmp_path):
        write_png(tmp_path / 'in.png', channels=1)
        out = tmp_path / 'frames'
        assert main(['modulate', str(tmp_path / 'in.png'), '--levels', '2', '--alpha', '0',
                     '--out', str(out)]) == 0
        frame = PngService().read(out / 'frame_00_alpha_0.png')
        assert np.all(frame[:4, :4] == frame[0, 0])

    def test_subbands(self, tmp_path):
        write_png(tmp_path / 'in.png')
        out = tmp_path / 'frames'
        assert main(['modulate', str(tmp_path / 'in.png'), '--levels', '2', '--alpha', '1',
                     '--out', str(out), '--subbands']) == 0
        for level in (1, 2):
            assert (out / f'subbands_alpha_1_level{level}.png').is_file()
            assert (out / f'll_alpha_1_level{level}.png').is_file()

    def test_missing_input(self, tmp_path):
        assert main(['modulate', str(tmp_path / 'absent.png'), '--out', str(tmp_path)]) == 2

    def test_too_small_for_levels(self, tmp_path):
        PngService().write(tmp_path / 'tiny.png', np.zeros((2, 2, 3)))
        assert main(['modulate', str(tmp_path / 'tiny.png'), '--levels', '3', '--out', str(tmp_path)]) == 2


@pytest.mark.integration
class TestTrain:
    """Tests for the train command."""

    def test_metrics_and_rerun(self, tmp_path):
        write_png(tmp_path / 'target.png')
        conf = write_config(tmp_path / 'run.conf', 'iterations = 10\nn0 = 8\nlevels = 1\n')
        runs = []
        for name in ('a', 'b'):
            out = tmp_path / name
            assert main(['train', str(tmp_path / 'target.png'), '--config', conf, '--out', str(out)]) == 0
            runs.append((out / 'metrics.csv').read_bytes())
            assert (out / 'render.png').is_file()
            assert (out / 'manifest.json').is_file()
        assert runs[0] == runs[1]

        rows = list(csv.reader(runs[0].decode('utf-8').splitlines()))
        assert rows[0] == ['iter', 'loss_total', 'loss_recon', 'loss_pr', 'alpha', 'num_gaussians', 'psnr',
                           'ssim']
        assert len(rows) == 11
        assert [int(r[0]) for r in rows[1:]] == list(range(1, 11))

    def test_seed_override_changes_run(self, tmp_path):
        write_png(tmp_path / 'target.png')
        conf = write_config(tmp_path / 'run.conf', 'iterations = 3\nn0 = 8\nlevels = 1\n')
        outputs = []
        for seed in ('0', '1'):
            out = tmp_path / seed
            assert main(['train', str(tmp_path / 'target.png'), '--config', conf, '--out', str(out),
                         '--seed', seed]) == 0
            outputs.append((out / 'metrics.csv').read_bytes())
        assert outputs[0] != outputs[1]

    def test_unknown_config_key(self, tmp_path):
        write_png(tmp_path / 'target.png')
        conf = write_config(tmp_path / 'run.conf', 'iterations = 3\nwarmup = 5\n')
        assert main(['train', str(tmp_path / 'target.png'), '--config', conf, '--out', str(tmp_path)]) == 2


@pytest.mark.integration
class TestAblate:
    """Tests for the ablate command."""

    def test_rows_with_summary(self, tmp_path):
        targets = tmp_path / 'targets'
        for seed, name in enumerate(('first', 'second')):
            write_png(targets / f'{name}.png', size=8, seed=seed)
        conf = write_config(tmp_path / 'sweep.conf',
                            'iterations = 2\nn0 = 4\nsweep_levels = 0, 1\nsweep_modes = scale\nsweep_seeds = 0\n')
        out = tmp_path / 'sweep'
        assert main(['ablate', str(targets), '--config', conf, '--out', str(out)]) == 0
        rows = list(csv.reader((out / 'ablation.csv').read_text(encoding='utf-8').splitlines()))
        data = [r for r in rows[1:] if r[0] != 'MEAN']
        means = [r for r in rows[1:] if r[0] == 'MEAN']
        assert len(data) == 4
        assert [(r[1], r[2]) for r in means] == [('0', 'none'), ('1', 'scale')]
        assert (out / 'manifest.json').is_file()

    def test_flag_overrides(self, tmp_path):
        targets = tmp_path / 'targets'
        write_png(targets / 'only.png', size=8)
        out = tmp_path / 'sweep'
        conf = write_config(tmp_path / 'sweep.conf', 'iterations = 2\nn0 = 4\n')
        assert main(['ablate', str(targets), '--config', conf, '--out', str(out), '--levels', '1',
                     '--mode', 'scale', 'whole', '--seed', '0', '1']) == 0
        rows = (out / 'ablation.csv').read_text(encoding='utf-8').splitlines()
        assert len(rows) == 1 + 4 + 2

    def test_empty_directory(self, tmp_path):
        (tmp_path / 'empty').mkdir()
        assert main(['ablate', str(tmp_path / 'empty'), '--out', str(tmp_path / 'out')]) == 2

    def test_unreadable_target(self, tmp_path):
        targets = tmp_path / 'targets'
        targets.mkdir()
        (targets / 'broken.png').write_text('nope', encoding='utf-8')
        assert main(['ablate', str(targets), '--out', str(tmp_path / 'out')]) == 2


@pytest.mark.unit
def test_invalid_environment_is_bad_input(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config._config = None
    with patch.dict(os.environ, {'ABLATE_JOBS': 'many'}):
        assert main(['prcheck', '--alpha', '1']) == 2
