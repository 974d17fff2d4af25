import logging
import os
import sys
from typing import Optional

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
TRUE_STRINGS = ("1", "true", "yes", "y", "on")


def get_logger(name: str,
               log_level: int = logging.INFO,
               log_file_name: Optional[str] = None,
               log_to_console: bool = True) -> logging.Logger:
    """
    Return the logger, capable to log into file and/or to console.

    Console output goes to stderr, stdout is reserved for report artifacts.
    Calling it again for the same name only adds the handlers it does not have yet.

    :param name: the name of the logger.
    :param log_level: The logging verbosity level.
    :param log_file_name: The file to be used to write logs if any.
    :param log_to_console: Boolean showing if we want to log into the console.
    :returns: The logger object.
    """
    logger = logging.getLogger(name)
    logger.setLevel(log_level)
    for handler in logger.handlers:
        handler.setLevel(log_level)

    has_console = any(type(handler) is logging.StreamHandler for handler in logger.handlers)
    if log_to_console and not has_console:
        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.setLevel(log_level)
        stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(stream_handler)

    log_files = {handler.baseFilename for handler in logger.handlers if isinstance(handler, logging.FileHandler)}
    if log_file_name and os.path.abspath(log_file_name) not in log_files:
        file_handler = logging.FileHandler(log_file_name)
        file_handler.setLevel(log_level)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)
    return logger


def get_env_bool(env_name: str, default: bool) -> bool:
    val = os.getenv(env_name)
    if val is None or val.strip() == "":
        return default
    return val.strip().lower() in TRUE_STRINGS


def get_env_int(env_name: str,
                default: int,
                logger: Optional[logging.Logger] = None,
                minimum: Optional[int] = None,
                maximum: Optional[int] = None) -> int:
    """
    Read an integer from the environment, accepting 0x/0o/0b prefixes.

    :param env_name: The variable name.
    :param default: The value used when the variable is unset, unparsable or out of range.
    :param logger: Where to warn about a rejected value.
    :param minimum: The smallest accepted value, if any.
    :param maximum: The largest accepted value, if any.
    :return: The parsed value or the default.
    """
    val = os.getenv(env_name)
    if val is None or val.strip() == "":
        return default
    try:
        value = int(val.strip(), 0)
    except ValueError:
        if logger is not None:
            logger.warning("Ignoring %s=%r: not an integer, using %d.", env_name, val, default)
        return default
    if (minimum is not None and value < minimum) or (maximum is not None and value > maximum):
        if logger is not None:
            logger.warning("Ignoring %s=%r: outside [%s, %s], using %d.", env_name, val, minimum, maximum, default)
        return default
    return value


def get_log_level(env_name: str, default: int = logging.WARNING) -> int:
    """Map a level name such as ``INFO`` from the environment to a logging level."""
    val = os.getenv(env_name)
    if not val:
        return default
    level = logging.getLevelName(val.strip().upper())
    return level if isinstance(level, int) else default
