"""
线程并行：区间切分、线程数与多线程装配
"""
import threading

import numpy as np

from stdg.core.assembly import assemble_operators, periodic_pairs
from stdg.core.basis import SpaceTimeBasis
from stdg.core.mesh import load_mesh
from stdg.utils.parallel import chunk_ranges, map_chunks, worker_count
from tests.conftest import WALL_BCS


def test_chunk_ranges_cover_everything():
    assert chunk_ranges(10, 3) == [(0, 3), (3, 6), (6, 10)]
    assert chunk_ranges(2, 8) == [(0, 1), (1, 2)]
    assert chunk_ranges(0, 4) == []


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("STDG_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("STDG_THREADS", "abc")
    assert worker_count() >= 1


def test_map_chunks_keeps_order_across_threads():
    seen = set()

    def work(a, b):
        seen.add(threading.get_ident())
        return list(range(a, b))

    parts = map_chunks(work, 20, threads=4)
    assert sum(parts, []) == list(range(20))
    assert len(parts) == 4
    assert len(seen) >= 1


def test_threaded_assembly_matches_serial(square_path):
    mesh = load_mesh(square_path, periodic_pairs(WALL_BCS))
    basis = SpaceTimeBasis(2, 1)
    serial = assemble_operators(mesh, basis, 0.1, WALL_BCS, 0.01, threads=1)
    threaded = assemble_operators(mesh, basis, 0.1, WALL_BCS, 0.01, threads=4)
    for name in ('Ms', 'Qs', 'B_diag', 'B_off', 'visc_diag'):
        np.testing.assert_array_equal(getattr(serial, name), getattr(threaded, name))
