import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from irdecoherence.io import ArtifactWriter, atomic_write, csv_text, fmt, json_text


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_fmt_specials():
    assert fmt(math.nan) == "nan" and fmt(math.inf) == "inf" and fmt(-math.inf) == "-inf"


def test_csv_text_shape_check():
    assert csv_text({"a": [1.0, 2.0], "b": [0.5, 0.25]}) == "a,b\n1,0.5\n2,0.25\n"
    with pytest.raises(ValueError):
        csv_text({"a": [1.0], "b": [1.0, 2.0]})


def test_json_text_handles_numpy():
    out = json.loads(json_text({"x": np.float64(1.5), "y": np.arange(2), "z": math.inf}))
    assert out == {"x": 1.5, "y": [0, 1], "z": "inf"}


def test_writer_is_all_or_nothing(tmp_path):
    w = ArtifactWriter(tmp_path / "out")
    w.add_text("a.txt", "1")
    w.add_csv("b.csv", {"t": [0.0]})
    with pytest.raises(ValueError):
        w.add_text("a.txt", "again")
    assert not (tmp_path / "out").exists()
    paths = w.commit()
    assert sorted(p.name for p in paths) == ["a.txt", "b.csv"]
    assert not list((tmp_path / "out").glob(".*.tmp"))


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "f.txt"
    atomic_write(p, "old")
    atomic_write(p, "new")
    assert p.read_text() == "new"
