""" Logging Formatter """
import logging

_FORMAT = "%(asctime)s %(levelname)s %(name)s (%(filename)s:%(lineno)d) -- %(message)s"

_COLORS = {
    logging.DEBUG: "\x1b[36;20m",
    logging.INFO: "\x1b[32;20m",
    logging.WARNING: "\x1b[33;20m",
    logging.ERROR: "\x1b[31;20m",
    logging.CRITICAL: "\x1b[31;1m",
}
_RESET = "\x1b[0m"


class CustomFormatter(logging.Formatter):
    """Colored formatter for the command line; `color=False` keeps plain text"""

    def __init__(self, color: bool = True) -> None:
        super().__init__(_FORMAT)
        self.color = color
        self._by_level = {
            level: logging.Formatter(code + _FORMAT + _RESET)
            for level, code in _COLORS.items()
        }

    def format(self, record: logging.LogRecord) -> str:
        if not self.color:
            return super().format(record)
        formatter = self._by_level.get(record.levelno)
        return formatter.format(record) if formatter else super().format(record)


def configure_logging(verbose: bool = False, color: bool = True) -> None:
    """Root logger setup shared by the console script and the debug entry point"""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, force=True)
    logging.getLogger().handlers[0].setFormatter(CustomFormatter(color))
    logging.getLogger("ortools").setLevel(logging.WARNING)
