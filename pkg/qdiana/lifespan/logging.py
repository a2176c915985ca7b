import logging

from qdiana.utils.log_config import setup_root_logger

PRIORITY = 0


def startup():
    setup_root_logger()


def shutdown():
    for handler in logging.getLogger().handlers:
        handler.flush()
