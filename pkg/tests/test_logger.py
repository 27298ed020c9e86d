import os

import structlog

from nh_spinwave.backend.logger import GLOBAL_LOGGER, bound_contextvars
from nh_spinwave.backend.logger.custom_logger import PACKAGE, add_run_fields


class TestRunFields:
    """Package, process and run context stamped onto every record."""

    def test_processor_chain(self):
        assert GLOBAL_LOGGER is not None
        processors = structlog.get_config()["processors"]
        assert processors[0] is structlog.contextvars.merge_contextvars
        assert add_run_fields in processors

    def test_package_and_pid(self):
        event = add_run_fields(None, "info", {"event": "Quench integration started"})
        assert event["package"] == PACKAGE
        assert event["pid"] == os.getpid()

    def test_explicit_fields_win(self):
        event = add_run_fields(None, "info", {"event": "x", "package": "other"})
        assert event["package"] == "other"

    def test_bound_quench_context(self):
        with bound_contextvars(flavor="boson", n_sites=16, dimension=1):
            event = structlog.contextvars.merge_contextvars(None, "info", {"event": "x", "samples": 3})
        assert event["flavor"] == "boson" and event["n_sites"] == 16 and event["samples"] == 3
        after = structlog.contextvars.merge_contextvars(None, "info", {"event": "y"})
        assert "flavor" not in after
