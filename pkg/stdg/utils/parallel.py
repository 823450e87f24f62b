"""
线程并行工具
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import psutil


def worker_count() -> int:
    """工作线程数：STDG_THREADS 环境变量，默认全部核心"""
    value = os.environ.get("STDG_THREADS", "").strip()
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return max(1, psutil.cpu_count(logical=True) or 1)


def chunk_ranges(n: int, parts: int):
    """把 range(n) 切成至多 parts 段连续区间"""
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def map_chunks(func, n: int, threads: int = None):
    """按区间并行执行 func(start, stop)，按顺序返回结果列表

    各区间只写自己的数据块，结果顺序固定。
    """
    threads = threads or worker_count()
    ranges = chunk_ranges(n, threads)
    if len(ranges) <= 1:
        return [func(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        futures = [pool.submit(func, a, b) for a, b in ranges]
        return [f.result() for f in futures]
