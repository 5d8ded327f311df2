import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutstokes.mesh import (
    Mesh,
    MeshError,
    build_uniform_mesh,
    face_path_exists,
    load_text,
    vertex_patch,
)

UNIT = ((0.0, 0.0), (1.0, 1.0))


def test_counts_2x2():
    m = build_uniform_mesh(UNIT, 2)
    assert (m.n_vertices, m.n_triangles, m.n_edges) == (9, 8, 16)


def test_uniform_metrics_2x2():
    m = build_uniform_mesh(UNIT, 2)
    # right isoceles half cells: diameter is the diagonal
    assert np.allclose(m.h_tri, np.sqrt(2.0) / 2.0)
    assert m.kappa <= 2.0 * (1.0 + np.sqrt(2.0)) + 1e-12
    assert m.kappa == pytest.approx(2.0 * (1.0 + np.sqrt(2.0)), abs=1e-12)


def test_perturbation_guard():
    with pytest.raises(MeshError):
        build_uniform_mesh(UNIT, 4, perturbation=0.5)
    with pytest.raises(MeshError):
        build_uniform_mesh(UNIT, 4, perturbation=0.25)
    build_uniform_mesh(UNIT, 4, perturbation=0.2499, seed=3)


def test_small_n_guard():
    with pytest.raises(MeshError):
        build_uniform_mesh(UNIT, 1)


def test_positive_orientation():
    for seed in range(3):
        m = build_uniform_mesh(UNIT, 5, perturbation=0.2, seed=seed)
        assert np.all(m.areas > 0.0)


def brute_force_patch(mesh, seed_tris):
    verts = set()
    for t in seed_tris:
        verts.update(int(v) for v in mesh.triangles[t])
    members = set()
    for t in range(mesh.n_triangles):
        if verts.intersection(int(v) for v in mesh.triangles[t]):
            members.add(t)
    return members


def test_vertex_patch_corner():
    m = build_uniform_mesh(UNIT, 2)
    patch = vertex_patch(m, [0])
    assert patch.members == frozenset(brute_force_patch(m, [0]))


def test_vertex_patch_saturation_and_empty():
    m = build_uniform_mesh(UNIT, 3)
    full = vertex_patch(m, range(m.n_triangles))
    assert full.members == frozenset(range(m.n_triangles))
    assert vertex_patch(m, []).members == frozenset()


def test_face_path_trivial_and_pair():
    m = build_uniform_mesh(UNIT, 2)
    found, path = face_path_exists(m, 3, 3, {3}, 5)
    assert found and path == [3]
    # the two halves of one grid cell share their diagonal
    found, path = face_path_exists(m, 0, 1, {0, 1}, 5)
    assert found and len(path) == 2


def test_face_path_disconnected():
    m = build_uniform_mesh(UNIT, 4)
    # two far corner cells with nothing in between
    a, b = 0, m.n_triangles - 1
    found, path = face_path_exists(m, a, b, {a, b}, 100)
    assert not found and path == []


def brute_force_incidence(mesh):
    """(edge -> incident triangles) rebuilt by scanning all pairs."""
    inc = {tuple(e): set() for e in mesh.edges.tolist()}
    for t, tri in enumerate(mesh.triangles):
        for k in range(3):
            key = tuple(sorted((int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3]))))
            inc[key].add(t)
    return inc


@pytest.mark.parametrize("n", [2, 5, 16])
def test_incidence_complete(n):
    m = build_uniform_mesh(UNIT, n, perturbation=0.1, seed=1)
    oracle = brute_force_incidence(m)
    for e, (a, b) in enumerate(m.edges.tolist()):
        stored = {int(t) for t in m.edge_tris[e] if t >= 0}
        assert stored == oracle[(a, b)]
        assert len(stored) in (1, 2)


def test_h_recompute():
    m = build_uniform_mesh(UNIT, 7, perturbation=0.15, seed=2)
    lengths = np.linalg.norm(
        m.vertices[m.edges[:, 0]] - m.vertices[m.edges[:, 1]], axis=1
    )
    h_tri = lengths[m.tri_edges].max(axis=1)
    assert m.h == h_tri.max()
    assert m.h_min == h_tri.min()
    assert np.array_equal(m.h_tri, h_tri)


def test_kappa_scale_invariance():
    kappas = [build_uniform_mesh(UNIT, n).kappa for n in (2, 4, 8, 16, 32, 64)]
    assert np.allclose(kappas, kappas[0], rtol=1e-12)


def test_edge_normals_unit_and_oriented():
    m = build_uniform_mesh(UNIT, 3, perturbation=0.1, seed=5)
    assert np.allclose(np.linalg.norm(m.edge_normals, axis=1), 1.0)
    mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    cent0 = m.vertices[m.triangles[m.edge_tris[:, 0]]].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", m.edge_normals, mids - cent0) > 0.0)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 50),
       pert=st.floats(0.0, 0.2))
def test_topology_properties(n, seed, pert):
    m = build_uniform_mesh(UNIT, n, perturbation=pert, seed=seed)
    assert np.all(m.areas > 0.0)
    # Euler formula for a disk-like triangulated region
    assert m.n_vertices - m.n_edges + m.n_triangles == 1
    assert np.all(m.rho_tri > m.h_tri / (m.kappa + 1e-12))


def test_save_load_roundtrip(tmp_path):
    m = build_uniform_mesh(UNIT, 4, perturbation=0.12, seed=9)
    path = tmp_path / "mesh.txt"
    m.save_text(path)
    m2 = load_text(path)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.allclose(m.vertices, m2.vertices, rtol=0, atol=0)
    assert np.array_equal(m.edges, m2.edges)


def test_mesh_from_arrays_validates_orientation():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        Mesh(verts, np.array([[0, 2, 1]]))
