"""
PNG service for image ingestion and emission.
"""
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from logger_config import get_logger
from transform import center_crop_to_multiple
from utils.exceptions import ImageReadError

logger = get_logger(__name__)

PathLike = Union[str, Path]


class PngService:
    """Service for 8-bit PNG reads and writes."""

    def __init__(self, root: PathLike = '.') -> None:
        """
        Initialize PNG service.

        Args:
            root: Directory relative paths are resolved against
        """
        self.root: Path = Path(root)

    def _resolve(self, path: PathLike) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.root / path

    def read(self, path: PathLike) -> np.ndarray:
        """
        Read a PNG as a float64 (H, W, C) array in [0, 1].

        Greyscale images keep one channel; everything else becomes RGB.

        Raises:
            ImageReadError: If the file is missing or not a decodable image
        """
        full = self._resolve(path)
        try:
            with Image.open(full) as img:
                img = img.convert('L') if img.mode in ('1', 'L', 'I;16', 'I', 'LA') else img.convert('RGB')
                data = np.asarray(img, dtype=np.float64) / 255.0
        except (OSError, UnidentifiedImageError) as e:
            raise ImageReadError(f'cannot read image {full}: {e}', path=str(full))
        if data.ndim == 2:
            data = data[:, :, None]
        logger.debug(f'Read {full} ({data.shape[0]}x{data.shape[1]}x{data.shape[2]})')
        return data

    def read_cropped(self, path: PathLike, levels: int) -> Tuple[np.ndarray, Tuple[int, int, int, int]]:
        """Read and center-crop to dims divisible by 2^levels; returns the crop box too."""
        return center_crop_to_multiple(self.read(path), levels)

    @staticmethod
    def to_uint8(image: np.ndarray) -> np.ndarray:
        """Round half up after scaling by 255, clipped to the 8-bit range."""
        return np.clip(np.floor(np.asarray(image, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)

    def write(self, path: PathLike, image: np.ndarray) -> Path:
        """Write an (H, W, 1) or (H, W, 3) array in [0, 1] as an 8-bit PNG."""
        full = self._resolve(path)
        full.parent.mkdir(parents=True, exist_ok=True)
        pixels = self.to_uint8(image)
        if pixels.ndim == 3 and pixels.shape[2] == 1:
            pixels = pixels[:, :, 0]
        Image.fromarray(pixels).save(full, format='PNG')
        logger.info(f'Wrote {full}')
        return full

    def list_pngs(self, directory: PathLike) -> List[Path]:
        """PNG files in `directory`, sorted by name."""
        folder = self._resolve(directory)
        if not folder.is_dir():
            raise ImageReadError(f'not a directory: {folder}', path=str(folder))
        return sorted(p for p in folder.iterdir() if p.suffix.lower() == '.png')
