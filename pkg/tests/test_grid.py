import numpy as np
import pytest

from lagwave.grid import (
    AcousticMedium,
    Constant,
    Layered,
    RasterDomainError,
    RasterHeaderError,
    RasterPayloadError,
    RasterValueError,
    build_grid,
    load_raster_model,
    read_raster,
    sample_acoustic,
    tilde,
    write_raster,
    write_raster_text,
)


def test_grid_steps_and_nodes():
    g = build_grid(3.5, 3.5, 4, 4)
    assert g.h_r == 1.0 and g.h_z == 1.0
    np.testing.assert_array_equal(g.r, [0.5, 1.5, 2.5, 3.5])
    g2 = build_grid(1.0, 1.0, 2, 2)
    assert g2.h_r == pytest.approx(2 / 3)
    np.testing.assert_allclose(g2.r, [1 / 3, 1.0])


@pytest.mark.parametrize("l1,l2,nr,nz", [(1.0, 2.0, 17, 33), (3000.0, 1234.5, 1001, 257), (0.1, 7.0, 5, 9)])
def test_last_node_on_wall(l1, l2, nr, nz):
    g = build_grid(l1, l2, nr, nz)
    assert g.r[-1] == pytest.approx(l1, rel=2e-16)
    assert g.z[-1] == pytest.approx(l2, rel=2e-16)


def test_grid_rejects_bad_extents():
    with pytest.raises(ValueError):
        build_grid(0.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        build_grid(1.0, -1.0, 4, 4)
    with pytest.raises(ValueError):
        build_grid(1.0, 1.0, 1, 4)


def test_nearest_cell():
    g = build_grid(3.5, 3.5, 4, 4)
    assert g.nearest_cell(0.0, 0.0) == (0, 0)
    assert g.nearest_cell(1.4, 2.6) == (1, 2)
    assert g.nearest_cell(3.5, 3.5) == (3, 3)
    with pytest.raises(ValueError):
        g.nearest_cell(4.0, 0.0)


def test_sample_acoustic_unit_medium():
    g = build_grid(3.5, 3.5, 4, 4)
    a1, a2, w = sample_acoustic(AcousticMedium(Constant(1.0), Constant(1.0)), g, 2.0)
    np.testing.assert_allclose(a1, np.repeat(g.r_face[:, None], 4, axis=1))
    np.testing.assert_allclose(a2, np.repeat(g.r[:, None], 4, axis=1))
    np.testing.assert_allclose(w, np.repeat(g.r[:, None], 4, axis=1))


def test_sample_acoustic_staggered_points():
    g = build_grid(3.5, 3.5, 4, 4)
    _, a2, _ = sample_acoustic(AcousticMedium(lambda r, z: z + 0 * r, Constant(1.0)), g, 2.0)
    assert a2[0, 0] == pytest.approx(0.5)


def test_sample_layered_pointwise():
    g = build_grid(10.0, 10.0, 12, 12)
    kappa = Layered((0.0, 3.3, 6.1), (1.0, 2.0, 5.0))
    a1, a2, _ = sample_acoustic(AcousticMedium(kappa, Constant(1.0)), g, 1.0)
    for i in range(12):
        for k in range(12):
            rb, zb = g.r_face[i], g.z_face[k]
            assert a1[i, k] == rb * kappa(rb, g.z[k])
            assert a2[i, k] == g.r[i] * kappa(g.r[i], zb)


def test_sampling_is_pure():
    g = build_grid(5.0, 5.0, 9, 7)
    med = AcousticMedium(Layered((0.0, 2.0), (1.0, 3.0)), Constant(2.0))
    first = sample_acoustic(med, g, 3.0)
    second = sample_acoustic(med, g, 3.0)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_sampling_rejects_nonpositive():
    g = build_grid(1.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        sample_acoustic(AcousticMedium(lambda r, z: z - 0.5, Constant(1.0)), g, 1.0)


def test_tilde():
    assert tilde(np.full((3, 3), 2.5)) == 2.5
    assert tilde([1.0, 3.0, 2.0]) == 2.0
    v = np.random.default_rng(0).uniform(1, 9, (50, 40))
    assert v.min() <= tilde(v) <= v.max()
    assert tilde(v) == 0.5 * (v.min() + v.max())


def test_layered_validation():
    with pytest.raises(ValueError):
        Layered((1.0, 2.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        Layered((0.0, 2.0), (1.0,))
    with pytest.raises(ValueError):
        Constant(-1.0)


def _marmousi_like(rng):
    vp = 1500 + 3000 * rng.random((23, 17))
    return {"vp": vp, "vs": vp / 1.8, "rho": 1000 + vp / 3}


def test_raster_roundtrip_binary(tmp_path):
    vals = _marmousi_like(np.random.default_rng(1))
    write_raster(tmp_path / "m.bin", (0.0, 500.0), (12.5, 12.5), vals)
    model = read_raster(tmp_path / "m.bin")
    for k in vals:
        np.testing.assert_array_equal(model.values[k], vals[k])
    assert model.origin == (0.0, 500.0) and model.spacing == (12.5, 12.5)


def test_raster_roundtrip_text(tmp_path):
    vals = _marmousi_like(np.random.default_rng(2))
    write_raster_text(tmp_path / "m.txt", (0.0, 0.0), (2.0, 3.0), vals)
    model = load_raster_model(tmp_path / "m.txt")
    for k in vals:
        np.testing.assert_array_equal(model.values[k], vals[k])


def test_raster_query_nearest(tmp_path):
    write_raster(tmp_path / "o.bin", (0.0, 0.0), (1.0, 1.0), {"k": np.ones((2, 2))})
    model = load_raster_model(tmp_path / "o.bin")
    assert np.all(model.query("k", np.array([0.0, 0.7, 1.2]), np.array([0.3, 1.0, 0.0])) == 1.0)
    vals = np.arange(12.0).reshape(3, 4) + 1
    write_raster(tmp_path / "v.bin", (10.0, 20.0), (2.0, 5.0), {"k": vals})
    model = load_raster_model(tmp_path / "v.bin")
    assert model.query("k", 14.0, 35.0) == vals[2, 3]
    with pytest.raises(RasterDomainError):
        model.query("k", 100.0, 20.0)


def test_raster_tilde_matches_scan(tmp_path):
    vals = _marmousi_like(np.random.default_rng(4))
    write_raster(tmp_path / "m.bin", (0.0, 0.0), (1.0, 1.0), vals)
    model = load_raster_model(tmp_path / "m.bin")
    vp = model.values["vp"]
    lo, hi = vp.flat[0], vp.flat[0]
    for v in vp.flat:
        lo, hi = min(lo, v), max(hi, v)
    assert tilde(vp) == 0.5 * (lo + hi)


def test_raster_errors_are_distinct(tmp_path):
    write_raster(tmp_path / "good.bin", (0.0, 0.0), (1.0, 1.0), {"k": np.ones((3, 3))})
    data = (tmp_path / "good.bin").read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"XXXXXXXX" + data[8:])
    (tmp_path / "short.bin").write_bytes(data[:-8])
    write_raster(tmp_path / "neg.bin", (0.0, 0.0), (1.0, 1.0), {"k": -np.ones((3, 3))})
    with pytest.raises(RasterHeaderError) as e1:
        read_raster(tmp_path / "magic.bin")
    with pytest.raises(RasterPayloadError) as e2:
        read_raster(tmp_path / "short.bin")
    with pytest.raises(RasterValueError) as e3:
        load_raster_model(tmp_path / "neg.bin")
    codes = {e1.value.code, e2.value.code, e3.value.code}
    assert len(codes) == 3


def test_raster_mapping(tmp_path):
    write_raster(tmp_path / "m.bin", (0.0, 0.0), (1.0, 1.0), {"P_velocity": np.full((2, 2), 3.0)})
    model = load_raster_model(tmp_path / "m.bin", {"vp": "P_velocity"})
    assert model.query("vp", 0.5, 0.5) == 3.0
    with pytest.raises(RasterHeaderError):
        load_raster_model(tmp_path / "m.bin", {"vs": "S_velocity"})
