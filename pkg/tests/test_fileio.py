import numpy as np
import pytest

from sobolev_glue import domain as dom
from sobolev_glue import fileio
from sobolev_glue import gridmap as gm
from sobolev_glue import target as tg
from sobolev_glue.errors import FormatError


def _random_map(rng, domain, nu=2):
    vals = rng.normal(size=domain.shape + (nu,))
    return gm.GridMap(domain=domain, target=tg.euclidean(nu), values=vals)


def test_grid_map_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    path = str(tmp_path / "m.sgf")
    for domain in (dom.square(5, 7), dom.cylinder(6, 4), dom.torus_collar(4, 4, 3)):
        m = _random_map(rng, domain)
        fileio.write_grid_map(path, m)
        back = fileio.read_grid_map(path)
        assert back.domain == m.domain
        assert back.target == m.target
        # 17 significant digits round-trip IEEE doubles exactly
        assert np.array_equal(back.values, m.values)
        assert back.constraint_tol == m.constraint_tol


def test_trace_map_round_trip(tmp_path):
    theta = dom.circle(16).axes[0].coordinates()
    tr = gm.TraceMap(
        base=dom.circle(16),
        target=tg.circle(),
        values=np.stack([np.cos(theta), np.sin(theta)], axis=-1),
        constraint_tol=1e-9,
    )
    path = str(tmp_path / "t.sgf")
    fileio.write_grid_map(path, tr)
    back = fileio.read_trace_map(path)
    assert np.array_equal(back.values, tr.values)
    assert back.target == tr.target
    assert back.target.constrained
    assert back.constraint_tol == tr.constraint_tol


def test_noncanonical_lengths_survive_via_manifest(tmp_path):
    d = dom.square(5, 4, lengths=(3.0 * np.pi / 2.0, 0.25))
    m = _random_map(np.random.default_rng(1), d, nu=3)
    path = str(tmp_path / "patch.sgf")
    fileio.write_grid_map(path, m)
    manifest = fileio.read_manifest(path)
    assert "axis_lengths" in manifest
    back = fileio.read_grid_map(path)
    assert back.domain.lengths == d.lengths
    assert np.array_equal(back.values, m.values)


def test_missing_manifest_falls_back_to_canonical(tmp_path):
    d = dom.square(4, 4)
    m = _random_map(np.random.default_rng(2), d)
    path = str(tmp_path / "m.sgf")
    fileio.write_grid_map(path, m)
    (tmp_path / "m.sgf.manifest").unlink()
    back = fileio.read_grid_map(path)
    assert back.domain == d
    assert np.array_equal(back.values, m.values)


def test_malformed_headers_raise_format_errors(tmp_path):
    path = str(tmp_path / "bad.sgf")
    cases = [
        "BOGUS square 2 4 4 euclidean\n0 0\n",
        "SGF1 pretzel 2 4 4 euclidean\n0 0\n",
        "SGF1 square 2 4 euclidean\n0 0\n",  # missing one resolution
        "SGF1 square x 4 4 euclidean\n0 0\n",
        "SGF1 square 2 4 4 banana\n0 0\n",
    ]
    for text in cases:
        with open(path, "w") as fh:
            fh.write(text)
        with pytest.raises(FormatError):
            fileio.read_grid_map(path)


def test_wrong_node_count_is_a_format_error(tmp_path):
    path = str(tmp_path / "short.sgf")
    with open(path, "w") as fh:
        fh.write("SGF1 interval 1 4 euclidean\n")
        fh.write("0\n0\n0\n")  # one line short of 4 nodes
    with pytest.raises(FormatError):
        fileio.read_grid_map(path)


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(FormatError):
        fileio.read_grid_map(str(tmp_path / "nope.sgf"))


def test_sampled_set_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    path = str(tmp_path / "f.set")
    bits1 = rng.random(33) < 0.5
    fileio.write_sampled_set(path, 1, 33, True, bits1)
    d, res, closed, back = fileio.read_sampled_set(path)
    assert (d, res, closed) == (1, 33, True)
    assert np.array_equal(back, bits1)
    bits2 = rng.random((17, 17)) < 0.5
    fileio.write_sampled_set(path, 2, 17, False, bits2)
    d, res, closed, back = fileio.read_sampled_set(path)
    assert (d, res, closed) == (2, 17, False)
    assert np.array_equal(back, bits2)


def test_sampled_set_rejects_bad_flag_and_ragged_rows(tmp_path):
    path = str(tmp_path / "bad.set")
    with open(path, "w") as fh:
        fh.write("SET1 2 3 sealed\n111\n111\n111\n")
    with pytest.raises(FormatError):
        fileio.read_sampled_set(path)
    with open(path, "w") as fh:
        fh.write("SET1 2 3 open\n111\n11\n111\n")
    with pytest.raises(FormatError):
        fileio.read_sampled_set(path)


def test_cone_certificate_round_trip(tmp_path):
    path = str(tmp_path / "c.cone")
    dirs = np.zeros(64, dtype=bool)
    dirs[10:20] = True
    fileio.write_cone_certificate(path, 63.0 / 64.0, dirs)
    radius, back = fileio.read_cone_certificate(path)
    assert radius == 63.0 / 64.0
    assert np.array_equal(back, dirs)


def test_cone_certificate_radius_must_be_interior(tmp_path):
    path = str(tmp_path / "c.cone")
    fileio.write_cone_certificate(path, 1.5, np.ones(4, dtype=bool))
    with pytest.raises(FormatError):
        fileio.read_cone_certificate(path)


def test_manifest_round_trip_and_digest(tmp_path):
    path = str(tmp_path / "out.bin")
    with open(path, "wb") as fh:
        fh.write(b"payload")
    fileio.write_manifest(path, {"a": "1", "b": "two words"})
    assert fileio.read_manifest(path) == {"a": "1", "b": "two words"}
    # sha256 of b"payload"
    assert fileio.sha256_of(path) == (
        "239f59ed55e737c77147cf55ad0c1b030b6d7ee748a7426952f9b852d5a935e5"
    )


def test_format_real_round_trips_doubles():
    xs = [np.pi, 1.0 / 3.0, 6.02e23, 5e-324, -0.0]
    for x in xs:
        assert float(fileio.format_real(x)) == x
