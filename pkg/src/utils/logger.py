import logging
import os
from datetime import datetime

from config import Config

LOGGER_NAME = 'beam_qtl'


def setup_logger(log_dir=None, console_level=None, to_file=True):
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)

    # Called once per process in practice; tests and make-figures call it repeatedly
    if logger.handlers:
        return logger

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    if to_file:
        log_dir = log_dir or Config.LOG_DIR
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        log_filename = os.path.join(
            log_dir, f"beam_qtl_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
        )
        file_handler = logging.FileHandler(log_filename)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel((console_level or Config.LOG_LEVEL).upper())
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    return logger
