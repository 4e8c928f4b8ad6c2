import numpy as np
import pytest

from geoshap import Schema, load_csv, make_folds, reassemble, split_geo
from geoshap.data import Dataset
from geoshap.errors import (
    EmptyAfterFiltering,
    InvalidK,
    MalformedCsv,
    MissingColumn,
)

CSV_OK = """x1,x2,lat,lon,y
1,2,30.1,-84.2,10
3,4,30.2,-84.3,20
5,6,30.3,-84.4,30
"""


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.fixture
def schema():
    return Schema(("x1", "x2", "lat", "lon"), "y", ("lat", "lon"))


class TestSchema:
    def test_geo_must_be_features(self):
        with pytest.raises(ValueError, match="geo columns"):
            Schema(("x1",), "y", ("lat",))

    def test_unique_names(self):
        with pytest.raises(ValueError, match="unique"):
            Schema(("x1", "x1"), "y", ("x1",))

    def test_needs_geo(self):
        with pytest.raises(ValueError, match="geo column"):
            Schema(("x1",), "y", ())

    def test_from_config(self, tmp_path):
        cfg = tmp_path / "schema.cfg"
        cfg.write_text(
            "features = x1, x2, lat, lon\nresponse = y\ngeo = lat, lon\n"
        )
        schema = Schema.from_config(cfg)
        assert schema.p == 4 and schema.g == 2
        assert schema.geo_indices == (2, 3)
        assert schema.nonspatial_names == ("x1", "x2")


class TestLoadCsv:
    def test_direct_parse(self, tmp_path, schema):
        ds = load_csv(write(tmp_path, CSV_OK), schema)
        assert ds.n == 3 and ds.X.shape == (3, 4)
        assert ds.dropped_count == 0
        assert list(ds.y) == [10, 20, 30]
        assert ds.ids == ("0", "1", "2")

    def test_blank_cell_dropped_and_counted(self, tmp_path, schema):
        text = CSV_OK.replace("3,4", "3,")
        ds = load_csv(write(tmp_path, text), schema)
        assert ds.n == 2
        assert ds.dropped_count == 1
        # order preserved over survivors
        assert list(ds.y) == [10, 30]

    def test_non_numeric_dropped(self, tmp_path, schema):
        text = CSV_OK.replace("5,6", "oops,6")
        ds = load_csv(write(tmp_path, text), schema)
        assert ds.n == 2 and ds.dropped_count == 1

    def test_missing_column(self, tmp_path, schema):
        text = CSV_OK.replace(",lon", ",lng")
        with pytest.raises(MissingColumn, match="lon"):
            load_csv(write(tmp_path, text), schema)

    def test_malformed_line(self, tmp_path, schema):
        text = CSV_OK + "1,2,3\n"
        with pytest.raises(MalformedCsv, match="line 5"):
            load_csv(write(tmp_path, text), schema)

    def test_empty_after_filtering(self, tmp_path, schema):
        text = "x1,x2,lat,lon,y\n,,,,\n"
        with pytest.raises(EmptyAfterFiltering):
            load_csv(write(tmp_path, text), schema)

    def test_column_order_is_schema_order(self, tmp_path, schema):
        text = "y,lon,lat,x2,x1\n10,-84.2,30.1,2,1\n"
        ds = load_csv(write(tmp_path, text), schema)
        assert list(ds.X[0]) == [1, 2, 30.1, -84.2]

    def test_id_column(self, tmp_path):
        schema = Schema(("x1", "lat", "lon"), "y", ("lat", "lon"), id_name="tract")
        text = "tract,x1,lat,lon,y\nA7,1,2,3,4\n"
        ds = load_csv(write(tmp_path, text), schema)
        assert ds.ids == ("A7",)

    def test_roundtrip_via_to_csv(self, tmp_path, schema):
        ds = load_csv(write(tmp_path, CSV_OK), schema)
        out = tmp_path / "again.csv"
        ds.to_csv(out)
        ds2 = load_csv(out, schema)
        np.testing.assert_array_equal(ds.X, ds2.X)
        np.testing.assert_array_equal(ds.y, ds2.y)


class TestFolds:
    def test_k_equals_n(self):
        plan = make_folds(10, 10, seed=0)
        sizes = np.bincount(plan.assignments, minlength=10)
        assert list(sizes) == [1] * 10

    def test_balance_103_10(self):
        plan = make_folds(103, 10, seed=1)
        sizes = np.bincount(plan.assignments, minlength=10)
        assert sorted(sizes) == [10] * 7 + [11] * 3
        assert set(plan.assignments) == set(range(10))

    def test_invalid_k(self):
        with pytest.raises(InvalidK):
            make_folds(5, 6, seed=0)
        with pytest.raises(InvalidK):
            make_folds(5, 1, seed=0)

    def test_deterministic(self):
        a = make_folds(57, 7, seed=42).assignments
        b = make_folds(57, 7, seed=42).assignments
        np.testing.assert_array_equal(a, b)
        c = make_folds(57, 7, seed=43).assignments
        assert not np.array_equal(a, c)

    def test_partition_property(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(2, 200))
            k = int(rng.integers(2, n + 1))
            plan = make_folds(n, k, seed=int(rng.integers(0, 1000)))
            sizes = np.bincount(plan.assignments, minlength=k)
            assert sizes.sum() == n
            assert sizes.max() - sizes.min() <= 1


class TestSplitGeo:
    def test_shapes(self, schema, tmp_path):
        ds = load_csv(write(tmp_path, CSV_OK), schema)
        nonspatial, geo = split_geo(ds)
        assert nonspatial.shape == (3, 2) and geo.shape == (3, 2)

    def test_single_geo_column(self):
        schema = Schema(("x1", "lat"), "y", ("lat",))
        ds = Dataset(schema, [[1.0, 2.0]], [3.0], ("0",))
        nonspatial, geo = split_geo(ds)
        assert geo.shape == (1, 1)

    def test_bit_exact_roundtrip(self, rng):
        schema = Schema(("a", "lat", "b", "lon", "c"), "y", ("lat", "lon"))
        X = rng.normal(size=(17, 5)) * 1e6
        ds = Dataset(schema, X, rng.normal(size=17), tuple(map(str, range(17))))
        nonspatial, geo = split_geo(ds)
        back = reassemble(schema, nonspatial, geo)
        assert (back == ds.X).all()
