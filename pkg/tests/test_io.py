import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfem_sif.io import (DOMAIN_HEADER, NODE_HEADER, dump_mesh, fmt, parse_mesh_dump,
                         read_csv, write_csv)
from sfem_sif.mesh import SpecimenSpec, apply_tip_modification, build_specimen_mesh
from sfem_sif.smoothing import build_node_domains


@pytest.mark.parametrize("value,text", [(None, ""), (True, "1"), (3, "3"), (0.1, "0.1"),
                                        (1 / 3, "0.333333333333"), (2.5e-20, "2.5e-20"),
                                        (np.float64(123456789.123456), "123456789.123"),
                                        ("ES", "ES")])
def test_fmt(value, text):
    assert fmt(value) == text


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
def test_csv_round_trip_to_twelve_digits(values):
    buf = io.StringIO()
    write_csv(buf, ("k", "v"), [{"k": k, "v": v} for k, v in enumerate(values)])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,v"
    back = [float(line.split(",")[1]) for line in lines[1:]]
    np.testing.assert_allclose(back, values, rtol=1e-11, atol=1e-300)


def test_csv_file(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, NODE_HEADER, [(0, 0.0, 1.0, 1e-3, None)])
    assert read_csv(path) == [{"node": "0", "x": "0", "y": "1", "ux": "0.001", "uy": ""}]
    assert "sxx" in DOMAIN_HEADER


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(["SEN", "CEN"]), st.sampled_from([Fraction(1, 2), Fraction(1, 3)]),
       st.sampled_from(["P1", "P2"]), st.booleans())
def test_mesh_dump_round_trip(kind, density, pattern, tip):
    mesh = build_specimen_mesh(SpecimenSpec(kind, density, pattern))
    if tip:
        mesh = apply_tip_modification(mesh)
    back = parse_mesh_dump(dump_mesh(mesh))
    assert np.array_equal(back["nodes"], mesh.nodes)
    assert np.array_equal(back["elements"], mesh.elements)
    assert back["kind"] == "T3"
    assert back["groups"].keys() == mesh.groups.keys()
    for k in mesh.groups:
        assert np.array_equal(back["groups"][k], mesh.groups[k])


def test_mesh_dump_with_domains():
    mesh = build_specimen_mesh(SpecimenSpec("SEN", Fraction(1, 2)))
    domains = build_node_domains(mesh)
    text = dump_mesh(mesh, domains)
    back = parse_mesh_dump(text)
    assert len(back["domains"]) == mesh.n_nodes
    anchor, kind, area, elems = back["domains"][12]
    assert (anchor, kind) == (12, "node")
    assert area == domains[12].area
    assert elems == domains[12].contributors.tolist()


def test_mesh_dump_rejects_unknown_section():
    with pytest.raises(ValueError, match="unknown"):
        parse_mesh_dump("faces 0\n")
