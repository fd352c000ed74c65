import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

from rich.console import Console

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

# Shared console for user-facing summaries and tables
console = Console()

logger = logging.getLogger(__name__)


def setup_logging(out_dir: Optional[str] = None, verbose: bool = False, name: str = "pq_sparse"):
    """
    Set up logging to both console and file

    Args:
        out_dir: Output directory; when given a timestamped log file is written there
        verbose: Enable debug logging
        name: Prefix for the log file name
    """
    log_level = logging.DEBUG if verbose else logging.INFO
    formatter = logging.Formatter(LOG_FORMAT)

    # Get the root logger and clear any existing handlers
    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(log_level)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if out_dir:
        try:
            log_dir = Path(out_dir)
            log_dir.mkdir(parents=True, exist_ok=True)
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            log_file_path = log_dir / f"{name}_{timestamp}.log"

            file_handler = logging.FileHandler(log_file_path)
            file_handler.setLevel(log_level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)

            logger.info(f"Logging to file: {log_file_path}")
        except OSError as e:
            logger.warning(f"Could not set up file logging: {e}")

    return root_logger
