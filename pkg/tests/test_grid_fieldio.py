import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretiv import fieldio
from accretiv.grid import GridError, GridSpec


def test_box_is_centred():
    g = GridSpec.box([2.0, 4.0], [8, 16])
    assert g.lower == (-1.0, -2.0)
    assert g.spacing == (0.25, 0.25)
    assert g.cell_volume == pytest.approx(0.0625)
    x = g.axis_nodes(0)
    assert x[0] == pytest.approx(-0.875) and x[-1] == pytest.approx(0.875)


@pytest.mark.parametrize("kwargs", [
    dict(lower=(0.0,), upper=(1.0,), points=(3,)),
    dict(lower=(0.0,), upper=(0.0,), points=(8,)),
    dict(lower=(0.0,) * 4, upper=(1.0,) * 4, points=(4,) * 4),
    dict(lower=(0.0,), upper=(1.0,), points=(8,), boundary="mirror"),
])
def test_bad_grids(kwargs):
    with pytest.raises(GridError):
        GridSpec(**kwargs)


def test_roundtrip_complex_matrix(tmp_path, rng):
    vals = rng.standard_normal((4, 5, 2, 2)) + 1j * rng.standard_normal((4, 5, 2, 2))
    p = fieldio.write_field(tmp_path / "a.afld", vals, (1.0, 2.0))
    ff = fieldio.read_field(p)
    assert ff.rank == 2 and ff.points == (4, 5) and ff.extents == (1.0, 2.0)
    np.testing.assert_array_equal(ff.values, vals)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 1), st.booleans(), st.integers(0, 2**32 - 1))
def test_roundtrip_property(ndim, rank, cplx, seed):
    r = np.random.default_rng(seed)
    shape = tuple(r.integers(2, 5, ndim)) + (ndim,) * rank
    vals = r.standard_normal(shape)
    if cplx:
        vals = vals + 1j * r.standard_normal(shape)
    ff = fieldio.decode_field(fieldio.encode_field(vals, (1.0,) * ndim))
    np.testing.assert_array_equal(ff.values, vals)
    assert ff.rank == rank


def test_corrupt_magic_names_file(tmp_path):
    p = tmp_path / "bad.afld"
    blob = bytearray(fieldio.encode_field(np.zeros((4, 4)), (1.0, 1.0)))
    blob[:5] = b"XXXXX"
    p.write_bytes(bytes(blob))
    with pytest.raises(fieldio.FieldFormatError, match="bad.afld"):
        fieldio.read_field(p)


def test_truncated_payload(tmp_path):
    blob = fieldio.encode_field(np.ones((4, 4)), (1.0, 1.0))
    with pytest.raises(fieldio.FieldFormatError):
        fieldio.decode_field(blob[:-8], "short")


def test_grid_mismatch(tmp_path):
    p = fieldio.write_field(tmp_path / "c.afld", np.ones((8, 8)), (1.0, 1.0))
    with pytest.raises(fieldio.FieldFormatError):
        fieldio.read_field(p, GridSpec.box([1.0, 1.0], 16))
