"""
日志工具模块
"""
import os
import logging
from datetime import datetime

from stdg.config.settings import LOG_SETTINGS, PATH_SETTINGS


def get_logger(name: str, log_dir: str = None) -> logging.Logger:
    """获取带文件和控制台输出的日志对象

    同名日志对象只添加一次处理器。
    Args:
        name: 日志对象名称
        log_dir: 日志目录，默认使用 PATH_SETTINGS['LOG_DIR']
    Returns:
        logging.Logger: 配置好的日志对象
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    logger.setLevel(getattr(logging, LOG_SETTINGS['LEVEL'], logging.INFO))
    formatter = logging.Formatter(LOG_SETTINGS['FORMAT'])

    if LOG_SETTINGS['TO_FILE']:
        log_dir = log_dir or PATH_SETTINGS['LOG_DIR']
        try:
            os.makedirs(log_dir, exist_ok=True)
            fh = logging.FileHandler(
                os.path.join(log_dir, f"stdg_{datetime.now().strftime('%Y%m%d')}.log"),
                encoding='utf-8'
            )
            fh.setFormatter(formatter)
            logger.addHandler(fh)
        except OSError:
            # 只读目录下仍保留控制台输出
            pass

    ch = logging.StreamHandler()
    ch.setFormatter(formatter)
    logger.addHandler(ch)
    return logger


def set_level(level: str):
    """调整所有 stdg 日志对象的级别"""
    LOG_SETTINGS['LEVEL'] = level.upper()
    for name in list(logging.root.manager.loggerDict):
        if name.startswith("stdg"):
            logging.getLogger(name).setLevel(getattr(logging, level.upper(), logging.INFO))
