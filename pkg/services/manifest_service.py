"""
Manifest service: one JSON manifest per artifact directory.
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config import TOOL_NAME, TOOL_VERSION
from logger_config import get_logger

logger = get_logger(__name__)

MANIFEST_NAME = 'manifest.json'


class ManifestService:
    """Service for run manifests."""

    def __init__(self, out_dir: Union[str, Path]) -> None:
        """
        Initialize manifest service.

        Args:
            out_dir: Artifact directory the manifest describes
        """
        self.out_dir: Path = Path(out_dir)

    @property
    def path(self) -> Path:
        return self.out_dir / MANIFEST_NAME

    @staticmethod
    def generate_key(command: str, config: Dict[str, Any]) -> str:
        """
        Generate a deterministic key for a command and its resolved config.

        Returns:
            A SHA256 hex digest
        """
        key_string = f'{command}:{json.dumps(config, sort_keys=True)}'
        return hashlib.sha256(key_string.encode('utf-8')).hexdigest()

    def exists(self) -> bool:
        return self.path.is_file()

    def read(self) -> Dict[str, Any]:
        return json.loads(self.path.read_text(encoding='utf-8'))

    def _previous(self) -> Optional[Dict[str, Any]]:
        if not self.exists():
            return None
        try:
            return self.read()
        except (OSError, ValueError) as e:
            logger.warning(f'Ignoring unreadable manifest {self.path}: {e}')
            return None

    def write(
        self,
        command: str,
        config: Dict[str, Any],
        inputs: List[str],
        outputs: List[str],
        seed: Optional[int],
        duration_s: float,
        extra: Optional[Dict[str, Any]] = None
    ) -> Path:
        """
        Write (or replace) the directory's manifest.

        Replacing a manifest whose config_key differs means the directory
        held artifacts of another run, which is logged as a warning.

        Returns:
            Path of the manifest file
        """
        manifest = {
            'command': command,
            'config': config,
            'config_key': self.generate_key(command, config),
            'inputs': inputs,
            'outputs': outputs,
            'seed': seed,
            'tool': TOOL_NAME,
            'tool_version': TOOL_VERSION,
            'duration_s': round(duration_s, 3),
        }
        if extra:
            manifest.update(extra)

        previous = self._previous()
        if previous is not None:
            if previous.get('config_key') == manifest['config_key']:
                logger.info(f'Replacing manifest of an identical {command} run in {self.out_dir}')
            else:
                logger.warning(
                    f'Replacing manifest of a different {previous.get("command", "unknown")} run '
                    f'in {self.out_dir}'
                )

        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + '\n', encoding='utf-8')
        logger.info(f'Wrote manifest {self.path} (key: {manifest["config_key"][:16]}...)')
        return self.path
