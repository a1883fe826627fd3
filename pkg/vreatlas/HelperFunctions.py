import logging
import os
from multiprocessing.dummy import Pool
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional

import numpy as np
import pandas as pd
import yaml

from vreatlas.Errors import ConfigError

# Environment variable capping the worker pool
THREADS_ENV = "VRE_ATLAS_THREADS"

# Function to write a result table to a CSV file
def write_csv_file(output_dir: str, table: pd.DataFrame, fieldnames: List[str], output_file: str, float_format: str = "%.6g") -> str:
    """
    Writes a table to a UTF-8 CSV file inside output_dir.

    Numbers are printed with 6 significant digits and columns follow
    `fieldnames`, so reruns on identical inputs give identical bytes.
    Tables of finite numbers only are formatted row by row in one pass,
    which gives the same bytes as pandas and is much faster on curves
    with millions of sites.

    Parameters:
    - output_dir (str): Directory for the output file; created if missing.
    - table (pd.DataFrame): Rows to write.
    - fieldnames (list): Column order of the CSV file.
    - output_file (str): The name (not path) of the output CSV file.
    - float_format (str): printf format for floats.

    Returns:
    - str: Full path of the written file.
    """
    output_dir = os.path.abspath(output_dir)
    os.makedirs(output_dir, exist_ok=True)
    output_csv_path = os.path.join(output_dir, output_file)
    lines = _numeric_lines(table, fieldnames, float_format)
    if lines is None:
        table.reindex(columns=fieldnames).to_csv(
            output_csv_path, index=False, float_format=float_format, lineterminator="\n", encoding="utf-8"
        )
    else:
        with open(output_csv_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(",".join(fieldnames) + "\n")
            if lines:
                f.write("\n".join(lines) + "\n")
    return output_csv_path

def _numeric_lines(table: pd.DataFrame, fieldnames: List[str], float_format: str) -> Optional[List[str]]:
    """CSV rows of an all-numeric, all-finite table; None when pandas has to format it."""
    if not fieldnames or not table.columns.is_unique or any(name not in table.columns or any(c in name for c in ',"\n') for name in fieldnames):
        return None
    formats, columns = [], []
    for name in fieldnames:
        values = table[name].to_numpy()
        if values.dtype.kind in "iu":
            formats.append("%d")
        elif values.dtype.kind == "f" and np.isfinite(values).all():
            formats.append(float_format)
        else:
            return None
        columns.append(values.tolist())
    row_format = ",".join(formats)
    return [row_format % row for row in zip(*columns)]

def parse_code_list(text: Any) -> FrozenSet[int]:
    """
    Parses "1,2,3" (or a list of ints) into a frozenset of ints.

    Returns an empty set for empty input; raises ValueError on non-integers.
    """
    if text is None:
        return frozenset()
    if isinstance(text, (list, tuple, set, frozenset)):
        return frozenset(int(v) for v in text)
    parts = [p.strip() for p in str(text).split(",")]
    return frozenset(int(p) for p in parts if p)

def thread_count() -> Optional[int]:
    """Pool size from VRE_ATLAS_THREADS; None lets the pool use every CPU."""
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        logging.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}")
        return None

def parallel_map(func: Callable[[Any], Any], items: Iterable[Any], processes: Optional[int] = None) -> List[Any]:
    """
    Applies func to every item on a thread pool, keeping input order.

    A keyboard interrupt stops the run and returns the results gathered so far.
    """
    items = list(items)
    processes = processes or thread_count()
    results: List[Any] = []
    if processes == 1 or len(items) <= 1:
        return [func(item) for item in items]
    try:
        with Pool(processes=processes) as pool:
            for result in pool.imap(func, items):
                results.append(result)
    except KeyboardInterrupt:
        logging.warning(f"Interrupted after {len(results)} of {len(items)} task(s); returning partial results")
    return results

def setup_logging(output_dir: str) -> str:
    """Appends log records to vreatlas.log inside output_dir."""
    os.makedirs(output_dir, exist_ok=True)
    log_path = os.path.join(os.path.abspath(output_dir), "vreatlas.log")
    logging.basicConfig(
        filename=log_path,
        filemode="a",
        level=logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
        force=True,
    )
    return log_path

def load_config(explicit_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Loads the first YAML config found.

    Search order: explicit_path, ./config.yaml, ~/.vreatlas/config.yaml and
    config.yaml next to this package.
    """
    possible_paths = [
        os.path.join(os.getcwd(), "config.yaml"),
        os.path.join(os.path.expanduser("~"), ".vreatlas", "config.yaml"),
        os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.yaml"),
    ]
    if explicit_path:
        if not os.path.exists(explicit_path):
            raise ConfigError(f"config file not found: {explicit_path}")
        possible_paths = [explicit_path]
    for config_path in possible_paths:
        if os.path.exists(config_path):
            with open(config_path, "r", encoding="utf-8") as f:
                try:
                    loaded = yaml.safe_load(f) or {}
                except (yaml.YAMLError, UnicodeDecodeError) as e:
                    raise ConfigError(f"{config_path}: not valid YAML: {e}") from e
            if not isinstance(loaded, dict):
                raise ConfigError(f"{config_path}: expected a mapping at the top level")
            loaded.setdefault("config_dir", os.path.dirname(os.path.abspath(config_path)))
            return loaded
    return {}

# Function to write txt file for displaying inputs for the package to run.
def write_log(output_dir: str, options: Dict[str, Any], file_name: str = "run_options.log") -> str:
    """
    Writes a summary of the options a run used next to its results.

    Parameters:
    - output_dir (str): Results directory.
    - options (dict): Option names and values.
    - file_name (str): Name of the summary file.

    Returns:
    - str: Path of the written file.
    """
    os.makedirs(output_dir, exist_ok=True)
    log_file_path = os.path.join(output_dir, file_name)
    with open(log_file_path, "w", encoding="utf-8", newline="\n") as log_file:
        log_file.write("Options:\n")
        for key, value in options.items():
            log_file.write(f"{key}: {value}\n")
    logging.info(f"Options summary saved to: {os.path.abspath(log_file_path)}")
    return log_file_path
