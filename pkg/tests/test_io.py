import json

import numpy as np
import pytest

from elastic_avgdist.geometry import Polyline, WeightedPointCloud
from elastic_avgdist.io import (
    InputError,
    dumps_json,
    load_cloud,
    read_curve_csv,
    render_svg,
    write_curve_csv,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestCsv:
    def test_coordinates_and_weights(self, tmp_path):
        path = write(tmp_path, "a.csv", "x,y,w\n0,0,1\n1.5,2,0.5\n")
        cloud = load_cloud(path, weight_col="w")
        assert cloud.points.tolist() == [[0, 0], [1.5, 2]]
        assert cloud.weights.tolist() == [1, 0.5]

    def test_weight_by_index_and_default(self, tmp_path):
        path = write(tmp_path, "a.csv", "w,x,y\n2,0,0\n3,1,1\n")
        assert load_cloud(path, weight_col="0").total_mass == 5
        assert load_cloud(path).dim == 3

    @pytest.mark.parametrize(
        "text, message",
        [
            ("", "no data points"),
            ("x,y\n", "no data points"),
            ("x,y,w\n0,0,1\n1,0,-2\n", "row 2: negative weight"),
            ("x,y\n0,0\n1\n", "row 2: expected 2 columns"),
            ("x,y\n0,nan\n", "row 1: non-finite"),
            ("x,y\n0,abc\n", "row 1: cannot parse"),
        ],
    )
    def test_malformed(self, tmp_path, text, message):
        path = write(tmp_path, "bad.csv", text)
        with pytest.raises(InputError, match=message):
            load_cloud(path, weight_col="w" if ",w" in text else None)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            load_cloud(tmp_path / "nope.csv")


class TestJson:
    def test_points_and_weights(self, tmp_path):
        path = write(tmp_path, "a.json", json.dumps({"points": [[0, 0], [1, 1]], "weights": [1, 3]}))
        assert load_cloud(path).total_mass == 4

    def test_default_weights(self, tmp_path):
        path = write(tmp_path, "a.json", json.dumps({"points": [[0, 0, 1]]}))
        assert load_cloud(path).total_mass == 1

    @pytest.mark.parametrize(
        "doc, message",
        [
            ({"points": []}, "no data points"),
            ({"points": [[0, 0], [1]]}, "row 2"),
            ({"points": [[0, 0]], "weights": [-1]}, "row 1: negative"),
            ([1, 2], "object"),
        ],
    )
    def test_malformed(self, tmp_path, doc, message):
        with pytest.raises(InputError, match=message):
            load_cloud(write(tmp_path, "a.json", json.dumps(doc)))


def test_curve_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    curve = Polyline(rng.normal(size=(20, 3)) / 7)
    write_curve_csv(tmp_path / "curve.csv", curve)
    assert (tmp_path / "curve.csv").read_text().splitlines()[0] == "x0,x1,x2"
    assert np.array_equal(read_curve_csv(tmp_path / "curve.csv").nodes, curve.nodes)


def test_json_handles_numpy_and_nonfinite():
    text = dumps_json({"b": np.float64(1.5), "a": np.arange(2), "c": float("nan"), "d": np.bool_(True)})
    assert json.loads(text) == {"a": [0, 1], "b": 1.5, "c": None, "d": True}
    assert text.index('"a"') < text.index('"b"')


class TestSvg:
    def test_planar(self):
        cloud = WeightedPointCloud([[0, 0], [1, 1], [2, 0]])
        svg = render_svg(cloud, [Polyline([[0, 0], [1, 1], [2, 0]])], title="t", node_mass=[1, 1, 1])
        assert svg.startswith("<svg") and "<polyline" in svg and svg.count("<circle") == 3

    def test_projects_higher_dimensions(self):
        rng = np.random.default_rng(1)
        cloud = WeightedPointCloud(rng.normal(size=(10, 4)))
        svg = render_svg(cloud, [Polyline(rng.normal(size=(5, 4)))], title="fit")
        assert "principal components" in svg
