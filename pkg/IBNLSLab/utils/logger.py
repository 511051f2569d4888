import logging
import sys

LOGGER_NAME = "ibnls"


def _formatter() -> logging.Formatter:
    return logging.Formatter(fmt="%(asctime)s [%(levelname)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")


def setup_logger(log_to_console=True, log_to_file=True, level=logging.INFO, log_file_path="ibnls.log"):
    logger = logging.getLogger(LOGGER_NAME)

    if logger.handlers:  # Prevent duplicate handlers on reload
        return logger

    logger.setLevel(level)
    if log_to_console:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(_formatter())
        logger.addHandler(console_handler)

    if log_to_file:
        file_handler = logging.FileHandler(log_file_path, encoding="utf-8")
        file_handler.setFormatter(_formatter())
        logger.addHandler(file_handler)

    return logger


def attach_run_log(log_file_path: str, level=logging.INFO) -> logging.Handler:
    """Add a per-run file handler to the ibnls logger; caller removes it when the run ends."""
    logger = logging.getLogger(LOGGER_NAME)
    if logger.level == logging.NOTSET or logger.level > level:
        logger.setLevel(level)
    handler = logging.FileHandler(log_file_path, encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(_formatter())
    logger.addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler):
    logging.getLogger(LOGGER_NAME).removeHandler(handler)
    handler.close()
