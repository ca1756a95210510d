import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqplan._kernels import INF, available_backends

BACKENDS = available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def test_backend_registry():
    assert "python" in BACKENDS


@needs_both
@given(
    data=st.lists(st.tuples(st.integers(1, 500), st.integers(1, 6)), min_size=1, max_size=20),
    q=st.integers(1, 8),
)
@settings(max_examples=150, deadline=None)
def test_bucket_tables_identical(data, q):
    values = np.asarray(sorted({v for v, _ in data}), dtype=np.int64)
    counts = np.asarray([sum(c for v2, c in data if v2 == v) for v in values], dtype=np.int64)
    tables = [m.bucket_suffix_error_table(values, counts, q) for m in BACKENDS.values()]
    assert np.array_equal(tables[0], tables[1])


@needs_both
@given(
    lengths=st.lists(st.integers(1, 1000), min_size=1, max_size=24),
    m=st.integers(1, 10),
)
@settings(max_examples=150, deadline=None)
def test_minimax_tables_identical(lengths, m):
    s = np.asarray(lengths, dtype=np.int64)
    tables = [mod.minimax_suffix_table(s, m) for mod in BACKENDS.values()]
    assert np.array_equal(tables[0], tables[1])


def test_infeasible_cells_are_inf():
    ref = BACKENDS["python"]
    table = ref.minimax_suffix_table(np.asarray([5, 6], dtype=np.int64), 3)
    assert table[0, 3] == INF  # cannot cut 2 elements into 3 non-empty runs
    assert table[0, 2] == 6
    assert table[0, 1] == 11
    bucket = ref.bucket_suffix_error_table(
        np.asarray([2, 9], dtype=np.int64), np.asarray([1, 1], dtype=np.int64), 2)
    assert bucket[0, 1] == 7  # one bucket: 2 inflated to 9
    assert bucket[0, 2] == 0
