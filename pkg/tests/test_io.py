import json
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hapt import io
from hapt.partition import bin_data, build_tree
from hapt.simgen import Scenario, generate
from hapt.sis import SisConfig
from hapt.tree_hmm import fit


def write(path, text):
    path.write_text(text)
    return path


def test_ingest_groups_by_first_appearance(tmp_path):
    data = io.ingest(write(tmp_path / "d.csv", "sample_id,value\nb,0.5\na,0.2\nb,0.1\na,0.7\n"))
    assert data.ids == ["b", "a"]
    assert data.samples[1].tolist() == [0.2, 0.7]
    assert data.lines == [[2, 4], [3, 5]]


def test_ingest_single_sample(tmp_path):
    data = io.ingest(write(tmp_path / "d.csv", "sample_id,value\na,0.2\na,0.7\n"))
    assert len(data.samples) == 1 and data.samples[0].size == 2


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ("id,value\na,1\n", "line 1"),
    ("sample_id,value\na,1\na,x\n", "line 3"),
    ("sample_id,value\na,nan\n", "line 2"),
    ("sample_id,value\na,1,2\n", "line 2"),
    ("sample_id,value\n", "no data"),
])
def test_ingest_errors(tmp_path, text, match):
    with pytest.raises(ValueError, match=match):
        io.ingest(write(tmp_path / "d.csv", text))


def test_ingest_bounds_names_line(tmp_path):
    path = write(tmp_path / "d.csv", "sample_id,value\na,3\na,11\n")
    with pytest.raises(ValueError, match="line 3"):
        io.ingest(path, (0.0, 10.0))


def test_auto_domain():
    lo, hi = io.auto_domain([np.array([2.0, 4.0]), np.array([12.0])])
    assert (lo, hi) == (2.0 - 0.01, 12.0)
    assert io.auto_domain([np.array([3.0, 3.0])]) == (2.5, 3.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_table_round_trip_is_bit_exact(values):
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "t.csv"
        io.write_table(path, ["v"], [np.array(values, dtype=float)])
        header, table = io.read_table(path)
    assert header == ["v"]
    assert table[:, 0].tobytes() == np.array(values, dtype=float).tobytes()


def test_fit_artifact_round_trip(tmp_path):
    d = generate(Scenario("s3", seed=2), 3, 80)
    tree = build_tree(5, (0.0, 1.0), base=np.linspace(0.3, 0.7, 31))
    tau = SisConfig.from_boundaries([0.5, 3.0, 20.0], beta=0.7)
    f = fit(tree, bin_data(tree, d.samples), tau)
    io.save_fit(f, tmp_path / "fit.json", ["x", "y", "z"])
    g, ids = io.load_fit(tmp_path / "fit.json")
    assert ids == ["x", "y", "z"]
    assert g.log_ml == f.log_ml
    assert g.tau == f.tau and g.nu == f.nu
    np.testing.assert_array_equal(g.tree.theta0, f.tree.theta0)
    for name in ("log_z", "m1", "m2", "q2", "d", "p", "log_beta", "log_phi"):
        np.testing.assert_array_equal(getattr(g, name), getattr(f, name))
    x = np.linspace(0, 1, 101)
    np.testing.assert_array_equal(g.mean_density(x), f.mean_density(x))
    np.testing.assert_array_equal(g.state_post, f.state_post)


def test_fit_artifact_rejects_other_files(tmp_path):
    (tmp_path / "x.json").write_text(json.dumps({"schema": "other"}))
    with pytest.raises(ValueError):
        io.load_fit(tmp_path / "x.json")
    with pytest.raises(FileNotFoundError):
        io.load_fit(tmp_path / "missing.json")


def test_non_finite_tables_survive_json():
    assert io._encode(np.array([1.0, -np.inf])) == [1.0, "-inf"]
    np.testing.assert_array_equal(io._decode_array([1.0, "-inf", "inf"]), [1.0, -np.inf, np.inf])
