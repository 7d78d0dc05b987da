import logging

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

__version__ = "0.1.0"
