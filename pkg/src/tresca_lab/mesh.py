"""Structured triangulations of the unit square with tagged boundary parts.

Tags: ``Gamma1`` is the left edge (x = 0), ``Gamma2`` the bottom edge
(y = 0) and ``Gamma3`` the right and top edges.
"""

from dataclasses import dataclass

import numpy as np

GAMMA1 = "Gamma1"
GAMMA2 = "Gamma2"
GAMMA3 = "Gamma3"
TAGS = (GAMMA1, GAMMA2, GAMMA3)


def _check_tag(tag):
    if tag not in TAGS:
        raise ValueError(f"unknown boundary tag {tag!r}; expected one of {TAGS}")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
    triangles : (n_tri, 3) int64 array, counter-clockwise
    facets : (n_facets, 2) int64 array of boundary edges
    facet_tags : tuple of str, one tag per facet
    nx, ny : subdivision counts
    """

    nodes: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_tags: tuple
    nx: int
    ny: int

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def boundary_facets(self):
        return [((int(a), int(b)), t) for (a, b), t in zip(self.facets, self.facet_tags)]

    def tag_facets(self, tag):
        _check_tag(tag)
        mask = np.array([t == tag for t in self.facet_tags], dtype=bool)
        return self.facets[mask]

    def node_index(self, i, j):
        return j * (self.nx + 1) + i


def build_unit_square_mesh(nx, ny):
    """Split each of the ``nx * ny`` cells along its lower-left/upper-right diagonal."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"subdivisions must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.arange(nx + 1) / nx
    ys = np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            n00, n10, n01, n11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
            tris.append((n00, n10, n11))
            tris.append((n00, n11, n01))
    triangles = np.array(tris, dtype=np.int64)

    facets, tags = [], []
    for j in range(ny):
        facets.append((idx(0, j), idx(0, j + 1)))
        tags.append(GAMMA1)
    for i in range(nx):
        facets.append((idx(i, 0), idx(i + 1, 0)))
        tags.append(GAMMA2)
    for j in range(ny):
        facets.append((idx(nx, j), idx(nx, j + 1)))
        tags.append(GAMMA3)
    for i in range(nx):
        facets.append((idx(i, ny), idx(i + 1, ny)))
        tags.append(GAMMA3)
    facets = np.array(facets, dtype=np.int64)

    for arr in (nodes, triangles, facets):
        arr.setflags(write=False)
    return Mesh(nodes, triangles, facets, tuple(tags), nx, ny)


def boundary_nodes(mesh, tag):
    """Sorted unique node indices on facets carrying ``tag``."""
    return np.unique(mesh.tag_facets(tag).ravel())


def trace_weights(mesh, tag):
    """Trapezoidal boundary weights aligned with :func:`boundary_nodes`.

    Each tagged facet of length ``l`` gives ``l/2`` to both endpoints, so the
    weights sum to the measure of the tagged part.
    """
    nodes = boundary_nodes(mesh, tag)
    facets = mesh.tag_facets(tag)
    lengths = np.linalg.norm(mesh.nodes[facets[:, 1]] - mesh.nodes[facets[:, 0]], axis=1)
    w_full = np.zeros(mesh.n_nodes)
    np.add.at(w_full, facets[:, 0], 0.5 * lengths)
    np.add.at(w_full, facets[:, 1], 0.5 * lengths)
    return w_full[nodes]


def triangle_areas(mesh):
    p0, p1, p2 = (mesh.nodes[mesh.triangles[:, k]] for k in range(3))
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
