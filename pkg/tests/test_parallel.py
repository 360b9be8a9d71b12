import threading

import pytest

from parallel import THREADS_ENV, parallel_map, worker_count


@pytest.mark.parametrize("value, expected", [("3", 3), ("1", 1)])
def test_worker_count_from_environment(monkeypatch, value, expected):
    monkeypatch.setenv(THREADS_ENV, value)
    assert worker_count() == expected


@pytest.mark.parametrize("value", ["0", "many"])
def test_bad_worker_counts_fall_back(monkeypatch, value):
    monkeypatch.setenv(THREADS_ENV, value)
    assert worker_count() >= 1


def test_map_keeps_input_order(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "4")
    assert parallel_map(lambda x: x * x, range(20)) == [x * x for x in range(20)]
    assert parallel_map(lambda x: x, []) == []


def test_single_worker_runs_inline(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "1")
    names = parallel_map(lambda _: threading.current_thread().name, range(3))
    assert set(names) == {threading.current_thread().name}
