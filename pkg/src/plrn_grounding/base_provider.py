import logging
from abc import ABC, abstractmethod
from typing import List

from .video_encoder import RawVideo

logger = logging.getLogger(__name__)


class FeatureProvider(ABC):
    """Abstract base class for per-frame video feature sources.

    Stands in for a frozen pretrained 3-D CNN: the network only ever sees
    the feature vectors a provider returns.
    """

    @abstractmethod
    def get_name(self) -> str:
        """Return the name of the provider."""
        pass

    @abstractmethod
    def video_ids(self) -> List[str]:
        """Return every video id the provider can serve, sorted."""
        pass

    @abstractmethod
    def load(self, video_id: str) -> RawVideo:
        """Load the per-frame features of a video.

        Args:
            video_id: Identifier used in annotation files

        Returns:
            RawVideo with frames and duration in seconds

        Raises:
            FileNotFoundError: If the video is unknown to the provider
        """
        pass

    def duration(self, video_id: str) -> float:
        """Duration in seconds (default implementation loads the whole video)."""
        return self.load(video_id).duration
