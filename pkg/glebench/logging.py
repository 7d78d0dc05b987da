from logging import Formatter, Handler, DEBUG, StreamHandler, ERROR, WARNING
from typing import List, Optional

from glebench import log

_default_handler: Optional[Handler] = None


class LeveledFormatter(Formatter):
    """ Formatter choosing the format string by the level of the record.

    Records without a registered format fall back to the default format of the formatter.
    """

    def __init__(self, *args, **kwargs):
        super(LeveledFormatter, self).__init__(*args, **kwargs)
        self._formats = {}

    def set_formatter(self, level, formatter):
        self._formats[level] = formatter

    def format(self, record):
        f = self._formats.get(record.levelno)
        if f is None:
            f = super(LeveledFormatter, self)
        return f.format(record)


def leveled_formatter() -> LeveledFormatter:
    """ Headlines as ``#### message``, details and errors as ``- message``, warnings as ``! message``. """
    formatter = LeveledFormatter('#### %(message)s')
    formatter.set_formatter(DEBUG, Formatter('- %(message)s'))
    formatter.set_formatter(WARNING, Formatter('! %(message)s'))
    formatter.set_formatter(ERROR, Formatter('- %(message)s'))
    return formatter


def enable_logging(handlers: Optional[List[Handler]] = None, log_level=DEBUG, enable_formatter=True):
    """ Attach handlers to the glebench logger.

    Without handlers a :class:`~logging.StreamHandler` with the :func:`leveled_formatter` is used. Repeated calls
    replace that stream handler instead of adding another one, so every CLI invocation logs each record once.

    Parameters
    ----------
    handlers :
        The handlers that should receive the log records
    log_level :
        The level of the glebench logger
    enable_formatter :
        If true the leveled format is used for the default handler
    """
    global _default_handler
    if not handlers:
        if _default_handler is not None:
            log.removeHandler(_default_handler)
        _default_handler = StreamHandler()
        if enable_formatter:
            _default_handler.setFormatter(leveled_formatter())
        log.addHandler(_default_handler)
    else:
        for handler in handlers:
            log.addHandler(handler)
    log.setLevel(log_level)
