import numpy as np
import pytest

from sgpmat.config import default_dict, from_dict
from sgpmat.experiments import (build_material_graph, build_mesh, interface_edge_count, material_index,
                                node_state, on_node, phantom_nodes, recovery_fraction)
from sgpmat.graph import DesignState, cyclic_linear_graph
from sgpmat.mesh import generate_structured_mesh
from sgpmat.tensor import ComplexSymTensor2 as T


@pytest.fixture(scope="module")
def graph3():
    return cyclic_linear_graph([T.isotropic(1.0), T.isotropic(0.25), T.isotropic((1 + 2j) ** -2)])


def test_phantom_shapes(graph3):
    pts = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, 0.18], [0.5, 0.5], [0.2, 0.2]])
    ph = [{"shape": "box", "center": [0.0, 0.0], "half_widths": [0.35, 0.05], "node": "m2"},
          {"shape": "disk", "center": [0.2, 0.2], "radius": 0.01, "node": "m3"},
          {"shape": "star", "center": [0.0, 0.0], "radius": 0.2, "inner_radius": 0.1, "points": 5, "node": "m3"}]
    ids = phantom_nodes(graph3, pts, ph)
    # the top star tip points along +y; later shapes overwrite earlier ones
    assert ids == ["m3", "m2", "m3", "m1", "m3"]
    with pytest.raises(ValueError):
        phantom_nodes(graph3, pts, [{"shape": "disk", "radius": 1.0, "node": "nope"}])


def test_node_state_and_material_index(graph3):
    ids = ["m1", "m3", "m2", "m2"]
    st = node_state(graph3, ids)
    assert np.all(on_node(st))
    names = [n.id for n in graph3.nodes]
    assert [names[i] for i in material_index(graph3, st)] == ids
    assert recovery_fraction(graph3, st, ids) == 1.0
    gray = DesignState.from_coordinates(graph3, st.edge, np.full(4, 0.5))
    assert recovery_fraction(graph3, gray, ids) == 0.0


def test_interface_count():
    mesh = generate_structured_mesh(h=0.1, h_pml=0.5)
    k = mesh.n_design
    assert interface_edge_count(mesh, np.zeros(k, int)) == 0
    labels = (mesh.centroids[:k, 0] > 0).astype(int)
    n = interface_edge_count(mesh, labels)
    # a straight cut crosses the design annulus (radii 0.2 to 0.4) twice
    assert 2 * 0.2 / 0.1 <= n <= 4 * 2 * 0.2 / 0.1
    assert interface_edge_count(mesh, 1 - labels) == n


def test_default_builders():
    cfg = from_dict(default_dict("tomography"), "tomography")
    g = build_material_graph(cfg)
    assert [n.id for n in g.nodes] == ["m1", "m2", "m3"] and g.n_edges == 3
    cfg = from_dict({"mesh": {"h": 0.25, "h_pml": 1.0}}, "cloaking")
    assert build_mesh(cfg).n_design > 0
    assert build_material_graph(cfg, orientations=8).n_edges == 8
    assert build_mesh(from_dict(default_dict("custom"), "custom")) is None
