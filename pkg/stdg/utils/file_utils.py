"""
文件操作工具函数模块
"""
import os
import tempfile
from contextlib import contextmanager

import pandas as pd


def ensure_directory(directory):
    """确保目录存在，如果不存在则创建
    Args:
        directory (str): 目录路径
    """
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)


@contextmanager
def atomic_open(path, mode='w'):
    """先写临时文件，成功后再原子替换目标文件

    出错时删除临时文件，目标文件保持原状（或不存在）。
    Args:
        path (str): 目标文件路径
        mode (str): 'w' 文本模式（UTF-8）或 'wb' 二进制模式
    """
    directory = os.path.dirname(os.path.abspath(path))
    ensure_directory(directory)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        if 'b' in mode:
            fh = os.fdopen(fd, mode)
        else:
            fh = os.fdopen(fd, mode, encoding='utf-8', newline='\n')
        with fh:
            yield fh
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_text_atomic(path, text):
    """原子写入文本文件"""
    with atomic_open(path, 'w') as fh:
        fh.write(text)


def write_table_csv(path, df: pd.DataFrame, float_format='%.5e'):
    """把 DataFrame 原子写成 CSV
    Args:
        path (str): 输出路径
        df (pd.DataFrame): 表格
        float_format (str): 浮点格式
    """
    with atomic_open(path, 'w') as fh:
        df.to_csv(fh, index=False, float_format=float_format)


def read_table_csv(path):
    """读取 CSV 表格
    Returns:
        pd.DataFrame: 表格内容
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"找不到CSV文件: {path}")
    return pd.read_csv(path)


class StepLogWriter:
    """逐步追加的 CSV 步进日志

    第一次 flush 覆盖旧文件并写表头，之后只追加新行；列顺序由第一行决定。
    """

    def __init__(self, path, float_format='%.5e'):
        self.path = path
        self.float_format = float_format
        self.columns = None
        self.pending = []
        self.written = 0

    def append(self, row: dict):
        self.pending.append(dict(row))

    def flush(self):
        if not self.path or not self.pending:
            return
        first = self.columns is None
        if first:
            self.columns = list(self.pending[0])
            ensure_directory(os.path.dirname(os.path.abspath(self.path)))
        df = pd.DataFrame(self.pending, columns=self.columns)
        df.to_csv(self.path, mode='w' if first else 'a', header=first, index=False,
                  float_format=self.float_format)
        self.written += len(self.pending)
        self.pending = []
