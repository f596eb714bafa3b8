import json

import numpy as np
import pytest

from spsdgeo import adaptation as da
from spsdgeo import io
from spsdgeo.errors import InvariantViolation, ParseError, ShapeMismatch, ValidationError
from spsdgeo.spsd import SpsdPoint, spsd_compose

from _util import nearby_point, random_point


def sample_set(rng, n=5, d=6, r=2, labels=True):
    X0 = random_point(rng, d, r)
    pts = [nearby_point(rng, X0) for _ in range(n)]
    return io.MatrixSet(pts, list(range(n)) if labels else None, r, d)


def items_equal(a, b):
    return all(np.array_equal(x.frame, y.frame) and np.array_equal(x.core, y.core) for x, y in zip(a, b))


class TestDataset:
    @pytest.mark.parametrize("binary", [True, False])
    def test_factored_round_trip_exact(self, rng, tmp_path, binary):
        ms = sample_set(rng)
        p = tmp_path / "a.json"
        io.write_dataset(ms, p, binary=binary)
        back = io.read_dataset(p)
        assert (back.d, back.r, back.labels) == (6, 2, [0, 1, 2, 3, 4])
        assert items_equal(back.items, ms.items)

    @pytest.mark.parametrize("binary", [True, False])
    def test_dense_round_trip_exact(self, rng, tmp_path, binary):
        ms = sample_set(rng)
        p = tmp_path / "a.json"
        io.write_dataset(ms, p, storage="dense", binary=binary)
        back = io.read_dataset(p)
        assert all(np.array_equal(a, b) for a, b in zip(back.items, ms.dense()))

    def test_binary_layout(self, rng, tmp_path):
        ms = sample_set(rng, n=2, d=3, r=1)
        p = tmp_path / "a.json"
        io.write_dataset(ms, p)
        raw = np.fromfile(str(p) + ".bin", dtype="<f8")
        man = json.loads(p.read_text())
        assert man["offsets"] == [0, 8 * 4]
        X = ms.items[1]
        assert np.array_equal(raw[4:], np.concatenate([X.frame.ravel(), X.core.ravel()]))

    def test_cross_storage(self, rng, tmp_path):
        ms = sample_set(rng)
        io.write_dataset(ms, tmp_path / "f.json")
        io.write_dataset(ms, tmp_path / "d.json", storage="dense")
        f = io.read_dataset(tmp_path / "f.json").dense()
        d = io.read_dataset(tmp_path / "d.json").dense()
        assert max(np.abs(a - b).max() for a, b in zip(f, d)) <= 1e-12

    def test_empty(self, tmp_path):
        p = tmp_path / "e.json"
        io.write_dataset(io.MatrixSet([], None, 2, 5), p)
        back = io.read_dataset(p)
        assert len(back) == 0 and back.d == 5

    def test_deterministic_bytes(self, rng, tmp_path):
        ms = sample_set(rng)
        io.write_dataset(ms, tmp_path / "a.json")
        io.write_dataset(ms, tmp_path / "b.json")
        assert (tmp_path / "a.json.bin").read_bytes() == (tmp_path / "b.json.bin").read_bytes()
        a = json.loads((tmp_path / "a.json").read_text())
        b = json.loads((tmp_path / "b.json").read_text())
        a.pop("binary_path"), b.pop("binary_path")
        assert a == b

    def test_indices_kept(self, rng, tmp_path):
        ms = sample_set(rng, n=3)
        ms.indices = [4, 9, 11]
        io.write_dataset(ms, tmp_path / "a.json")
        assert io.read_dataset(tmp_path / "a.json").indices == [4, 9, 11]

    def test_shape_mismatch(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"schema_version": 1, "d": 4, "r": None, "count": 1,
                                 "storage": "dense", "data": [[np.eye(3).tolist()]]}))
        with pytest.raises(ShapeMismatch):
            io.read_dataset(p)

    def test_truncated_binary(self, rng, tmp_path):
        ms = sample_set(rng)
        p = tmp_path / "a.json"
        io.write_dataset(ms, p)
        b = tmp_path / "a.json.bin"
        b.write_bytes(b.read_bytes()[:-8])
        with pytest.raises(ShapeMismatch):
            io.read_dataset(p)

    def test_non_orthonormal_frame(self, rng, tmp_path):
        ms = sample_set(rng)
        X = ms.items[3]
        G = X.frame.copy()
        G[0, 0] += 1e-3
        ms.items[3] = SpsdPoint(G, X.core)
        p = tmp_path / "a.json"
        io.write_dataset(ms, p)
        with pytest.raises(InvariantViolation) as exc:
            io.read_dataset(p)
        assert exc.value.index == 3

    def test_non_pd_core(self, rng, tmp_path):
        ms = sample_set(rng)
        ms.items[1] = SpsdPoint(ms.items[1].frame, np.diag([1.0, -1.0]))
        io.write_dataset(ms, tmp_path / "a.json")
        with pytest.raises(InvariantViolation) as exc:
            io.read_dataset(tmp_path / "a.json")
        assert exc.value.index == 1

    @pytest.mark.parametrize(
        "text",
        [
            "not json",
            "[1, 2]",
            '{"schema_version": 2, "d": 2, "r": 1, "count": 0, "storage": "dense"}',
            '{"schema_version": 1, "d": 2, "r": 1, "count": 0, "storage": "sparse"}',
            '{"schema_version": 1, "d": 2, "r": 1, "count": 0, "storage": "dense"}',
        ],
    )
    def test_parse_errors(self, tmp_path, text):
        p = tmp_path / "bad.json"
        p.write_text(text)
        with pytest.raises(ParseError):
            io.read_dataset(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            io.read_dataset(tmp_path / "nope.json")

    def test_bad_storage_on_write(self, rng, tmp_path):
        with pytest.raises(ValidationError):
            io.write_dataset(sample_set(rng), tmp_path / "a.json", storage="csr")


class TestTransport:
    def test_round_trip(self, rng, tmp_path):
        X = random_point(rng, 7, 2)
        Y = nearby_point(rng, X, 0.5, 0.5)
        t = da.build_spsd_transport(X, Y)
        io.write_transport(t, tmp_path / "t.json")
        back = io.read_transport(tmp_path / "t.json")
        for name in ("source_frame", "source_core", "target_frame", "target_core", "rotation", "E"):
            assert np.array_equal(getattr(back, name), getattr(t, name))
        C = spsd_compose(nearby_point(rng, X))
        assert np.array_equal(da.da_oos(back, C), da.da_oos(t, C))

    def test_wrong_kind(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text('{"schema_version": 1, "kind": "other"}')
        with pytest.raises(ParseError):
            io.read_transport(p)


class TestCsv:
    def test_format(self, tmp_path):
        p = tmp_path / "a.csv"
        io.write_csv(p, ["a", "b"], [[1, 0.1], [2, 1 / 3]])
        raw = p.read_bytes()
        assert b"\r" not in raw
        assert raw.decode().splitlines() == ["a,b", "1,0.10000000000000001", "2,0.33333333333333331"]

    def test_lossless(self, rng, tmp_path):
        vals = rng.standard_normal(50) * 10.0 ** rng.integers(-200, 200, 50)
        p = tmp_path / "a.csv"
        io.write_csv(p, ["x"], [[v] for v in vals])
        header, rows = io.read_csv(p)
        assert header == ["x"]
        assert np.array_equal(np.array([float(r[0]) for r in rows]), vals)

    def test_empty(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        with pytest.raises(ParseError):
            io.read_csv(p)
