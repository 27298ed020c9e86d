import sys
import traceback
from typing import Optional, cast


class SpinWaveException(Exception):
    """Base error carrying the file and line it originated from.

    ``error_details`` may be the ``sys`` module, a caught exception, or
    omitted; in the last case the active exception (if any) is used and
    otherwise the frame that raised this error.
    """

    exit_code = 1

    def __init__(self, error_message, error_details: Optional[object] = None):
        norm_msg = str(error_message)

        exc_type = exc_value = exc_tb = None
        if error_details is None:
            exc_type, exc_value, exc_tb = sys.exc_info()
        elif hasattr(error_details, "exc_info"):
            exc_info_obj = cast(sys, error_details)
            exc_type, exc_value, exc_tb = exc_info_obj.exc_info()
        elif isinstance(error_details, BaseException):
            exc_type, exc_value, exc_tb = type(error_details), error_details, error_details.__traceback__
        else:
            exc_type, exc_value, exc_tb = sys.exc_info()

        last_tb = exc_tb
        while last_tb and last_tb.tb_next:
            last_tb = last_tb.tb_next

        if last_tb is not None:
            self.file_name = last_tb.tb_frame.f_code.co_filename
            self.lineno = last_tb.tb_lineno
        else:
            # raised directly: report the first frame outside this module
            frame = sys._getframe(1)
            while frame is not None and frame.f_code.co_filename == __file__:
                frame = frame.f_back
            self.file_name = frame.f_code.co_filename if frame else "<unknown>"
            self.lineno = frame.f_lineno if frame else -1

        self.error_message = norm_msg

        if exc_type and exc_tb:
            self.traceback_str = "".join(traceback.format_exception(exc_type, exc_value, exc_tb))
        else:
            self.traceback_str = ""

        super().__init__(self.__str__())

    def __str__(self):
        base = f"Error in [{self.file_name}] at line [{self.lineno}] | Message: {self.error_message}"
        if self.traceback_str:
            return f"{base}\nTraceback:\n{self.traceback_str}"
        return base

    def __repr__(self):
        return (
            f"{type(self).__name__}(file={self.file_name!r}, line={self.lineno}, "
            f"message={self.error_message!r})"
        )


class DomainError(SpinWaveException):
    """Invalid parameters or violated preconditions."""

    exit_code = 1


class NumericalFailure(SpinWaveException):
    """Non-finite values, failed eigensolves, norm underflow, missing roots."""

    exit_code = 2
