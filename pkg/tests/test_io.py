import json
import math

import numpy as np
import pytest

from kppdomain import geometry as g
from kppdomain import io
from kppdomain.analysis import transverse_fourier
from kppdomain.eigen import principal_eigenvalue
from kppdomain.operators import Field


def same_domain(a, b):
    return (
        a.grid == b.grid
        and np.array_equal(a.mask, b.mask)
        and np.array_equal(a.face_sigma, b.face_sigma, equal_nan=True)
        and json.dumps(io._jsonable(dict(a.tags)), sort_keys=True) == json.dumps(dict(b.tags), sort_keys=True)
    )


@pytest.mark.parametrize(
    "dom",
    [
        g.build_rectangle(1, 1, 0.1, 0.3),
        g.build_disk(1, 1 / 8, 0.7),
        g.build_comb(12, 2, [1, 2], 4, 1, 0.25),
        g.build_bulb(6, math.pi, 60, 0.1, snap_critical=True),
        g.intersect_ball(g.build_strip(20, 1, 1 / 8, 0.5), (10.0, 0.5), 1.5),
    ],
)
def test_domain_round_trip_bit_exact(dom, tmp_path):
    p = tmp_path / "d.txt"
    io.write_domain(dom, p)
    back = io.read_domain(p)
    assert same_domain(dom, back)
    assert io.domain_to_text(back) == p.read_text()
    assert principal_eigenvalue(back) == principal_eigenvalue(dom)


def test_domain_text_rejects_garbage():
    with pytest.raises(ValueError):
        io.domain_from_text("not a domain\n")
    text = io.domain_to_text(g.build_rectangle(1, 1, 0.25))
    with pytest.raises(ValueError):
        io.domain_from_text(text.replace("faces", "fakes"))


def test_field_csv_round_trip(tmp_path, rng):
    d = g.build_disk(1, 1 / 8)
    f = Field(rng.standard_normal(d.n_cells), d)
    p = tmp_path / "f.csv"
    io.write_field_csv(f, p)
    assert np.array_equal(io.read_field_csv(p, d).values, f.values)
    other = g.build_disk(1.5, 1 / 8)
    with pytest.raises(ValueError):
        io.read_field_csv(p, other)


def test_field_raw_round_trip(tmp_path, rng):
    d = g.build_comb(12, 2, [1, 2], 4, 1, 0.25)
    f = Field(rng.standard_normal(d.n_cells), d)
    p = tmp_path / "f.raw"
    io.write_field_raw(f, p)
    assert p.stat().st_size == 16 + 8 * d.grid.nx * d.grid.ny
    grid = io.read_field_raw(p)
    assert np.isnan(grid[~d.mask]).all()
    assert np.array_equal(io.read_field_raw(p, d).values, f.values)
    with pytest.raises(ValueError):
        io.read_field_raw(p, g.build_rectangle(1, 1, 0.25))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        io.read_field_raw(p)


def test_scan_and_profile_csv(tmp_path):
    rows = [(0.1, 0.2, 3.0), (1 / 3, 2.0, math.pi)]
    p = tmp_path / "scan.csv"
    io.write_scan_csv(rows, p)
    assert np.array_equal(io.read_scan_csv(p), np.array(rows))
    d = g.build_strip(30, 3, 0.25)
    prof = transverse_fourier(Field.constant(d, 1.0), K_max=3)
    q = tmp_path / "prof.csv"
    io.write_profile_csv(prof, q)
    data = np.loadtxt(q, delimiter=",", skiprows=1)
    assert data.shape == (prof.x_samples.size, 4)
    assert q.read_text().splitlines()[0] == "x,alpha_1,alpha_2,alpha_3"


def test_write_json_sorted_and_numpy(tmp_path):
    p = tmp_path / "r.json"
    io.write_json({"b": np.float64(1.5), "a": np.arange(3), "c": (True, np.bool_(False))}, p)
    text = p.read_text()
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5, "c": [True, False]}
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
