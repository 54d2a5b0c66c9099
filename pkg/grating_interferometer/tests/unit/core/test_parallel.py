import threading

import pytest

from grating_interferometer.utils.parallel import ordered_map

pytestmark = pytest.mark.unit


@pytest.mark.parametrize("workers", [1, 4])
def test_ordered_map_keeps_input_order(workers):
    assert ordered_map(lambda v: v * v, range(20), workers=workers) == [v * v for v in range(20)]


def test_ordered_map_uses_threads():
    seen = set()

    def record(v):
        seen.add(threading.get_ident())
        return v

    assert ordered_map(record, range(8), workers=2, progress=True, desc="items") == list(range(8))
    assert seen


def test_ordered_map_empty():
    assert ordered_map(str, [], workers=3) == []
