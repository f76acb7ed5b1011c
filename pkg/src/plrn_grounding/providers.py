import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Union

from .base_provider import FeatureProvider
from .errors import ConfigurationError
from .video_encoder import RawVideo, read_duration, read_features, write_features

logger = logging.getLogger(__name__)

FEATURE_SUFFIX = ".feat"


class FileFeatureProvider(FeatureProvider):
    """Reads precomputed FEAT1 files named ``<video_id>.feat`` from a directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def get_name(self) -> str:
        return "file"

    def path(self, video_id: str) -> Path:
        return self.root / f"{video_id}{FEATURE_SUFFIX}"

    def video_ids(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.stem for p in self.root.glob(f"*{FEATURE_SUFFIX}"))

    def load(self, video_id: str) -> RawVideo:
        path = self.path(video_id)
        if not path.is_file():
            raise FileNotFoundError(f"feature file not found: {path}")
        return read_features(path)

    def duration(self, video_id: str) -> float:
        path = self.path(video_id)
        if not path.is_file():
            raise FileNotFoundError(f"feature file not found: {path}")
        return read_duration(path)

    def save(self, video_id: str, raw: RawVideo) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(video_id)
        write_features(path, raw)
        return path


class MemoryFeatureProvider(FeatureProvider):
    """Dictionary-backed provider; the synthetic generator fills one of these."""

    def __init__(self, videos: Optional[Dict[str, RawVideo]] = None):
        self.videos: Dict[str, RawVideo] = dict(videos or {})

    def get_name(self) -> str:
        return "memory"

    def video_ids(self) -> List[str]:
        return sorted(self.videos)

    def load(self, video_id: str) -> RawVideo:
        if video_id not in self.videos:
            raise FileNotFoundError(f"video '{video_id}' not held in memory")
        return self.videos[video_id]

    def save(self, video_id: str, raw: RawVideo) -> None:
        self.videos[video_id] = raw


def create_provider(provider_name: str, root: Optional[Union[str, Path]] = None) -> FeatureProvider:
    """Factory function to create feature providers.

    Args:
        provider_name: Name of the provider ('file' or 'memory')
        root: Feature directory, required by the file provider

    Returns:
        FeatureProvider instance

    Raises:
        ConfigurationError: If provider_name is not supported
    """
    provider_name = provider_name.lower()

    if provider_name in ["file", "disk"]:
        if root is None:
            raise ConfigurationError("the file feature provider needs a feature directory")
        return FileFeatureProvider(root)
    elif provider_name in ["memory", "synthetic"]:
        return MemoryFeatureProvider()
    else:
        raise ConfigurationError(f"Unsupported feature provider: {provider_name}. Supported providers: file, memory")


def get_provider_from_env(root: Optional[Union[str, Path]] = None) -> FeatureProvider:
    """Get the feature provider named by PLRN_FEATURE_PROVIDER (default 'file')."""
    provider_name = os.environ.get("PLRN_FEATURE_PROVIDER", "file")
    provider = create_provider(provider_name, root)
    logger.debug(f"Using {provider.get_name()} feature provider")
    return provider
