"""
Utility functions for the neighborhood vibrancy analysis toolkit.
"""
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence, TypeVar, Union

import pandas as pd
from rich.console import Console
from rich.logging import RichHandler

# Diagnostics go to stderr; data only ever goes to files
console = Console(stderr=True)

logger = logging.getLogger("vibrancy")

T = TypeVar("T")
R = TypeVar("R")

CSV_FLOAT_FORMAT = "%.10g"


def setup_logging(level: Union[str, int] = "INFO") -> None:
    """
    Configure the application logger with a rich handler on stderr.

    Args:
        level: logging level name or number
    """
    handler = RichHandler(console=console, show_path=False, show_time=False, markup=False)
    handler.setFormatter(logging.Formatter("%(name)s - %(message)s"))
    root = logging.getLogger("vibrancy")
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(level if isinstance(level, int) else level.upper())
    root.propagate = False


def normalize_label(label: str) -> str:
    """
    Normalize a free-text type label for whitelist lookups.

    Args:
        label (str): raw label as found in an input file

    Returns:
        str: trimmed, case-folded label with internal whitespace collapsed
    """
    return re.sub(r"\s+", " ", label.strip()).casefold()


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_frame_csv(frame: pd.DataFrame, path: Union[str, Path], index: bool = False) -> Path:
    """
    Write a DataFrame as CSV with fixed float formatting and '\\n' line endings.

    Args:
        frame: table to write
        path: destination file
        index: whether to write the index column

    Returns:
        Path: the written path
    """
    path = Path(path)
    ensure_dir(path.parent)
    frame.to_csv(path, index=index, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", na_rep="")
    return path


def read_frame_csv(path: Union[str, Path], **kwargs: Any) -> pd.DataFrame:
    """Read a CSV artifact keeping block-group ids as strings."""
    kwargs.setdefault("dtype", {"blockgroup_id": str})
    return pd.read_csv(path, **kwargs)


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    """Write JSON with sorted keys so reruns are byte-identical."""
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, sort_keys=True, indent=2, default=_json_default)
        f.write("\n")
    return path


def _json_default(value: Any) -> Any:
    if hasattr(value, "isoformat"):
        return value.isoformat()
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def run_ordered(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """
    Apply func to every item, optionally on a thread pool, returning results in input order.

    Args:
        func: callable applied to each item
        items: work items
        jobs: worker count; 1 runs inline

    Returns:
        list: results aligned with items
    """
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def format_float(value: Optional[float], digits: int = 4) -> str:
    """Format a possibly-missing float for console tables."""
    if value is None or value != value:
        return "-"
    return f"{value:.{digits}f}"


def read_json(path: Union[str, Path]) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
