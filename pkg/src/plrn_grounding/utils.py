import csv
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


def ensure_dir(path: Union[str, Path]) -> Path:
    """Create ``path`` (and parents) if needed and return it."""
    path = Path(path)
    if not path.exists():
        path.mkdir(parents=True)
        logger.debug(f"Created output directory {path}")
    return path


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """Write a CSV table, floats in repr form so reruns are byte-identical.

    Args:
        path: Destination file
        header: Column names
        rows: Row values

    Returns:
        Path to the written file
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    logger.info(f"Table written to {path}")
    return path


def read_csv(path: Union[str, Path]) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def parse_float_list(text: str) -> List[float]:
    """Parse ``0.3,0.5,0.7`` style lists."""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got '{text}'") from None


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated integers, got '{text}'") from None
