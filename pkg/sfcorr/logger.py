import logging
import logging.handlers
from typing import Optional

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Package root logger; module loggers hang off it via getLogger(__name__)
logger = logging.getLogger("sfcorr")
logger.addHandler(logging.NullHandler())


def configure_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    syslog_host: Optional[str] = None,
    syslog_port: int = 514,
) -> logging.Logger:
    """Attach handlers to the package logger.

    A stream handler is always installed. A file handler is added when
    `log_file` is set and a remote syslog handler when `syslog_host` is set.
    Calling this again replaces the previously installed handlers.
    """
    logger.setLevel(level.upper())
    for handler in list(logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            logger.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(formatter)
    logger.addHandler(stream_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    if syslog_host:
        syslog_handler = logging.handlers.SysLogHandler(address=(syslog_host, syslog_port))
        syslog_handler.setFormatter(formatter)
        logger.addHandler(syslog_handler)

    return logger


def getLogger(name):
    return logging.getLogger(name)
