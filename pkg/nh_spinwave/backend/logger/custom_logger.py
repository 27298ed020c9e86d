import os
import sys
import logging
from datetime import datetime
from typing import Any, Dict

import structlog

PACKAGE = "nh_spinwave"


def add_run_fields(logger: Any, method_name: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
    """Stamp package and pid; pool workers log into the same file as the parent."""
    event_dict.setdefault("package", PACKAGE)
    event_dict.setdefault("pid", os.getpid())
    return event_dict


class CustomLogger:
    """JSON structured logging to stderr and a timestamped file under ``logs/``.

    Fields bound with :func:`structlog.contextvars.bound_contextvars` (the CLI
    binds ``command``, reproduce binds ``target``, integration binds
    ``flavor``, ``n_sites`` and ``dimension``) are merged into every record.
    """

    def __init__(self, log_dir="logs"):
        self.logs_dir = os.path.join(os.getcwd(), log_dir)
        os.makedirs(self.logs_dir, exist_ok=True)

        log_file = f"{PACKAGE}_{datetime.now().strftime('%m_%d_%Y_%H_%M_%S')}.log"
        self.log_file_path = os.path.join(self.logs_dir, log_file)

    def get_logger(self, name=PACKAGE):
        file_handler = logging.FileHandler(self.log_file_path)
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(logging.Formatter("%(message)s"))

        # stdout carries CSV and summaries, so the console stream is stderr
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(logging.Formatter("%(message)s"))

        logging.basicConfig(
            level=logging.INFO,
            format="%(message)s",
            handlers=[console_handler, file_handler],
        )

        structlog.configure(
            processors=[
                structlog.contextvars.merge_contextvars,
                add_run_fields,
                structlog.processors.TimeStamper(fmt="iso", utc=True, key="timestamp"),
                structlog.processors.add_log_level,
                structlog.processors.EventRenamer(to="event"),
                structlog.processors.JSONRenderer(),
            ],
            logger_factory=structlog.stdlib.LoggerFactory(),
            cache_logger_on_first_use=True,
        )

        return structlog.get_logger(name)
