# logger/__init__.py
from structlog.contextvars import bound_contextvars

from .custom_logger import CustomLogger

# Create a single shared logger instance
GLOBAL_LOGGER = CustomLogger().get_logger("nh_spinwave")
