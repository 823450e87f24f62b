"""
文件工具：原子写入与步进日志
"""
import os

import pandas as pd
import pytest

from stdg.utils.file_utils import StepLogWriter, atomic_open, read_table_csv


def test_step_log_appends_only_new_rows(tmp_path):
    path = str(tmp_path / "logs" / "steps.csv")
    writer = StepLogWriter(path)
    writer.flush()
    assert not os.path.exists(path)

    writer.append({'step': 1, 't': 0.1, 'dt': 0.1})
    writer.flush()
    with open(path, encoding='utf-8') as fh:
        head = fh.read()
    assert head.count('\n') == 2

    writer.append({'step': 2, 't': 0.2, 'dt': 0.1})
    writer.append({'step': 3, 't': 0.3, 'dt': 0.1})
    writer.flush()
    with open(path, encoding='utf-8') as fh:
        full = fh.read()
    assert full.startswith(head)
    assert full.count('\n') == 4
    assert writer.written == 3 and not writer.pending

    df = read_table_csv(path)
    assert list(df.columns) == ['step', 't', 'dt']
    assert list(df['step']) == [1, 2, 3]
    assert df['t'].iloc[-1] == pytest.approx(0.3)


def test_step_log_replaces_previous_run(tmp_path):
    path = str(tmp_path / "steps.csv")
    pd.DataFrame({'old': [1, 2, 3]}).to_csv(path, index=False)
    writer = StepLogWriter(path)
    writer.append({'step': 1, 'energy': 0.5})
    writer.flush()
    df = pd.read_csv(path)
    assert list(df.columns) == ['step', 'energy'] and len(df) == 1


def test_atomic_open_keeps_target_on_error(tmp_path):
    path = str(tmp_path / "data.txt")
    with atomic_open(path) as fh:
        fh.write("first")
    with pytest.raises(RuntimeError):
        with atomic_open(path) as fh:
            fh.write("second")
            raise RuntimeError("中断")
    with open(path, encoding='utf-8') as fh:
        assert fh.read() == "first"
    assert sorted(os.listdir(str(tmp_path))) == ["data.txt"]
