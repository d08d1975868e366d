"""Triangulations of the coordinate domain, edge topology and edge frames.

Mesh text format (``#`` starts a comment)::

    nodes N
    id x1 x2            (N lines)
    triangles M
    id v1 v2 v3         (M lines, counterclockwise)
    boundary K
    id va vb marker     (K lines, marker in {D, S, F})

Ids are arbitrary integers; they are renumbered consecutively in file order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from . import jets
from .errors import DuplicateTriangle, MeshError, NonconformingMesh, UnmarkedBoundary
from .geometry import Chart, eval_geometry

MARKERS = ("D", "S", "F")
INTERIOR = "I"


class Mesh:
    """Conforming triangulation with D/S/F boundary markers.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    triangles : array_like, shape (nt, 3)
        Vertex indices.  Clockwise triangles are reoriented.
    boundary : iterable of (va, vb, marker)
        One entry per boundary edge.

    Notes
    -----
    Local edge ``i`` of a triangle is the edge opposite its vertex ``i``,
    traversed counterclockwise from vertex ``i+1`` to vertex ``i+2``.
    Interior edges store the counterclockwise orientation of their first
    adjacent triangle (the one with the smaller index); jumps are taken as
    first side minus second side.
    """

    def __init__(self, vertices, triangles, boundary: Iterable[tuple[int, int, str]]):
        v = np.asarray(vertices, dtype=float)
        t = np.array(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise MeshError("triangles must have shape (m, 3) with m >= 1")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle references an unknown vertex")
        area2 = _cross2(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        if np.any(np.abs(area2) <= 1e-14 * max(1.0, np.max(np.abs(v)) ** 2)):
            raise MeshError("degenerate triangle with zero area")
        cw = area2 < 0
        t[cw] = t[cw][:, [0, 2, 1]]
        keys = np.sort(t, axis=1)
        uniq, counts = np.unique(keys, axis=0, return_counts=True)
        if np.any(counts > 1):
            raise DuplicateTriangle(f"triangle {uniq[counts > 1][0].tolist()} appears more than once")
        self.vertices = v
        self.triangles = t
        self._build_edges(boundary)

    # -- topology -------------------------------------------------------------
    def _build_edges(self, boundary):
        t = self.triangles
        adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for e, tri in enumerate(t):
            for i in range(3):
                a, b = int(tri[(i + 1) % 3]), int(tri[(i + 2) % 3])
                adj.setdefault((min(a, b), max(a, b)), []).append((e, i))
        marks: dict[tuple[int, int], str] = {}
        for va, vb, mk in boundary:
            mk = str(mk).strip().upper()
            if mk not in MARKERS:
                raise MeshError(f"boundary marker must be one of {MARKERS}, got {mk!r}")
            key = (min(int(va), int(vb)), max(int(va), int(vb)))
            if key in marks:
                raise MeshError(f"boundary edge {key} listed twice")
            marks[key] = mk
        nedge = len(adj)
        edges = np.empty((nedge, 2), dtype=np.int64)
        elems = -np.ones((nedge, 2), dtype=np.int64)
        local = -np.ones((nedge, 2), dtype=np.int64)
        marker = np.empty(nedge, dtype="<U1")
        elem_edges = np.empty((len(t), 3), dtype=np.int64)
        for k, (key, lst) in enumerate(sorted(adj.items(), key=lambda kv: (kv[1][0][0], kv[1][0][1]))):
            if len(lst) > 2:
                raise NonconformingMesh(f"edge {key} is shared by {len(lst)} triangles")
            lst = sorted(lst)
            e0, i0 = lst[0]
            tri = t[e0]
            edges[k] = (tri[(i0 + 1) % 3], tri[(i0 + 2) % 3])
            for s, (e, i) in enumerate(lst):
                elems[k, s] = e
                local[k, s] = i
                elem_edges[e, i] = k
            if len(lst) == 2:
                if key in marks:
                    raise MeshError(f"interior edge {key} carries a boundary marker")
                marker[k] = INTERIOR
            elif key in marks:
                marker[k] = marks.pop(key)
            else:
                if self._hanging(key):
                    raise NonconformingMesh(f"hanging node on edge {key}")
                raise UnmarkedBoundary(f"boundary edge {key} has no marker")
        if marks:
            raise MeshError(f"boundary entries {sorted(marks)} are not boundary edges of the mesh")
        self.edges = edges
        self.edge_elems = elems
        self.edge_local = local
        self.edge_marker = marker
        self.elem_edges = elem_edges

    def _hanging(self, key) -> bool:
        a, b = self.vertices[key[0]], self.vertices[key[1]]
        d = b - a
        ln2 = d @ d
        rel = self.vertices - a
        s = rel @ d / ln2
        off = np.abs(_cross2(np.broadcast_to(d, rel.shape), rel)) / np.sqrt(ln2)
        inside = (s > 1e-12) & (s < 1 - 1e-12) & (off < 1e-12 * np.sqrt(ln2))
        return bool(np.any(inside))

    # -- sizes ---------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_marker == INTERIOR)

    def boundary_edges(self, markers: str = "DSF") -> np.ndarray:
        """Indices of boundary edges whose marker is in ``markers``."""
        return np.flatnonzero(np.isin(self.edge_marker, list(markers)))

    @cached_property
    def elem_vertices(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape ``(nt, 3, 2)``."""
        return self.vertices[self.triangles]

    @cached_property
    def area(self) -> np.ndarray:
        p = self.elem_vertices
        return 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def h_e(self) -> np.ndarray:
        """Euclidean edge lengths."""
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    @cached_property
    def h_tau(self) -> np.ndarray:
        """Triangle diameters (longest edge)."""
        return self.h_e[self.elem_edges].max(axis=1)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.elem_vertices.mean(axis=1)

    @cached_property
    def free_edge_count(self) -> np.ndarray:
        """Number of F edges per triangle."""
        return (self.edge_marker[self.elem_edges] == "F").sum(axis=1)

    def edge_direction(self, edge: int, elem: int) -> np.ndarray:
        """Unit counterclockwise traversal direction of ``edge`` seen from ``elem``."""
        s = 0 if self.edge_elems[edge, 0] == elem else 1
        if self.edge_elems[edge, s] != elem:
            raise ValueError(f"element {elem} is not adjacent to edge {edge}")
        d = self.vertices[self.edges[edge, 1]] - self.vertices[self.edges[edge, 0]]
        d = d / np.linalg.norm(d)
        return d if s == 0 else -d

    def summary(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "triangles": self.n_elements,
            "edges": self.n_edges,
            "interior_edges": int(len(self.interior_edges)),
            "h_max": float(self.h_tau.max()),
            "shape_regularity": float(shape_regularity(self)),
        }

    def boundary_list(self) -> list[tuple[int, int, str]]:
        return [(int(self.edges[k, 0]), int(self.edges[k, 1]), str(self.edge_marker[k])) for k in self.boundary_edges()]


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def load_mesh(text: str) -> Mesh:
    """Parse the plain-text mesh format described in the module docstring."""
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line.split())
    pos = 0

    def header(name):
        nonlocal pos
        if pos >= len(lines) or len(lines[pos]) != 2 or lines[pos][0].lower() != name:
            raise MeshError(f"expected '{name} <count>' header")
        try:
            n = int(lines[pos][1])
        except ValueError as exc:
            raise MeshError(f"bad count in '{name}' header") from exc
        pos += 1
        block = lines[pos : pos + n]
        if len(block) != n:
            raise MeshError(f"'{name}' block is truncated")
        pos += n
        return block

    try:
        nodes = header("nodes")
        ids = {}
        verts = []
        for row in nodes:
            ids[int(row[0])] = len(verts)
            verts.append((float(row[1]), float(row[2])))
        tris = []
        for row in header("triangles"):
            tris.append([ids[int(r)] for r in row[1:4]])
        bnd = []
        if pos < len(lines):
            for row in header("boundary"):
                if len(row) < 4:
                    raise UnmarkedBoundary(f"boundary entry {row[0]} has no marker")
                bnd.append((ids[int(row[1])], ids[int(row[2])], row[3]))
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed mesh file: {exc}") from exc
    if pos != len(lines):
        raise MeshError("unexpected trailing content in mesh file")
    return Mesh(np.array(verts), np.array(tris), bnd)


def read_mesh(path) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        return load_mesh(fh.read())


def dump_mesh(mesh: Mesh) -> str:
    """Serialize a mesh to the text format."""
    out = [f"nodes {mesh.n_vertices}"]
    out += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    out.append(f"triangles {mesh.n_elements}")
    out += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.triangles.tolist())]
    bl = mesh.boundary_list()
    out.append(f"boundary {len(bl)}")
    out += [f"{i} {a} {b} {m}" for i, (a, b, m) in enumerate(bl)]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# generators and refinement
# ---------------------------------------------------------------------------

DEFAULT_MARKERS = {"left": "D", "right": "D", "bottom": "D", "top": "D"}


def rectangle_mesh(
    nx: int,
    ny: int | None = None,
    bounds=((0.0, 1.0), (0.0, 1.0)),
    markers: Mapping[str, str] | None = None,
    pattern: str = "right",
) -> Mesh:
    """Structured triangulation of a rectangle.

    Parameters
    ----------
    nx, ny : int
        Number of cells per direction.
    bounds : ((x0, x1), (y0, y1))
    markers : mapping
        Marker (D/S/F) for the ``left``, ``right``, ``bottom`` and ``top``
        sides; missing sides default to D.
    pattern : {"right", "left", "crisscross"}
        Diagonal direction of every cell, or alternating diagonals.
    """
    ny = nx if ny is None else ny
    if nx < 1 or ny < 1:
        raise ValueError("need at least one cell per direction")
    mk = dict(DEFAULT_MARKERS)
    mk.update(markers or {})
    (x0, x1), (y0, y1) = bounds
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    verts = np.array([(x, y) for y in ys for x in xs])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if pattern == "right":
                diag = 0
            elif pattern == "left":
                diag = 1
            elif pattern == "crisscross":
                diag = (i + j) % 2
            else:
                raise ValueError(f"unknown pattern {pattern!r}")
            if diag == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    bnd = []
    for i in range(nx):
        bnd.append((vid(i, 0), vid(i + 1, 0), mk["bottom"]))
        bnd.append((vid(i + 1, ny), vid(i, ny), mk["top"]))
    for j in range(ny):
        bnd.append((vid(0, j + 1), vid(0, j), mk["left"]))
        bnd.append((vid(nx, j), vid(nx, j + 1), mk["right"]))
    return Mesh(verts, np.array(tris), bnd)


def square_mesh(n: int, markers=None, pattern: str = "right") -> Mesh:
    """Unit square with ``n`` cells per side."""
    return rectangle_mesh(n, n, markers=markers, pattern=pattern)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children through edge midpoints."""
    nv = mesh.n_vertices
    mid = nv + np.arange(mesh.n_edges)
    verts = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])])
    t = mesh.triangles
    m = mid[mesh.elem_edges]  # m[:, i] is the midpoint of the edge opposite vertex i
    m01, m12, m20 = m[:, 2], m[:, 0], m[:, 1]
    kids = np.stack(
        [
            np.stack([t[:, 0], m01, m20], axis=1),
            np.stack([m01, t[:, 1], m12], axis=1),
            np.stack([m20, m12, t[:, 2]], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    bnd = []
    for k in mesh.boundary_edges():
        a, b = mesh.edges[k]
        mk = str(mesh.edge_marker[k])
        bnd += [(a, mid[k], mk), (mid[k], b, mk)]
    return Mesh(verts, kids, bnd)


def refine(mesh: Mesh, times: int) -> Mesh:
    for _ in range(times):
        mesh = refine_uniform(mesh)
    return mesh


# ---------------------------------------------------------------------------
# shape regularity
# ---------------------------------------------------------------------------


def element_shape_regularity(mesh: Mesh) -> np.ndarray:
    """Smallest-enclosing-circle diameter over inscribed-circle diameter, per triangle."""
    lens = mesh.h_e[mesh.elem_edges]
    a, b, c = lens[:, 0], lens[:, 1], lens[:, 2]
    area = mesh.area
    r_in = 2.0 * area / (a + b + c)
    r_circ = a * b * c / (4.0 * area)
    lmax = lens.max(axis=1)
    obtuse = 2.0 * lmax**2 > (a**2 + b**2 + c**2) + 1e-14 * lmax**2
    r_enc = np.where(obtuse, 0.5 * lmax, r_circ)
    return r_enc / r_in


def shape_regularity(mesh: Mesh) -> float:
    """Global shape-regularity constant ``K`` (maximum over triangles)."""
    return float(element_shape_regularity(mesh).max())


# ---------------------------------------------------------------------------
# edge frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeFrame:
    """Surface normal/tangent at points of a straight coordinate edge.

    Attributes hold arrays with a leading component axis of length 2 where
    applicable.
    """

    n_cov: np.ndarray
    n_con: np.ndarray
    s_cov: np.ndarray
    s_con: np.ndarray
    w_e: np.ndarray
    nbar: np.ndarray
    sqrt_a: np.ndarray


def frame_jets(geom, direction):
    """Edge-frame quantities as jets for a coordinate direction per point.

    Parameters
    ----------
    geom : GeometryEval
    direction : ndarray, shape (2, *points)
        Unit Euclidean traversal direction ``d``; the outward Euclidean
        normal is ``(d₂, −d₁)``.

    Returns
    -------
    dict with jets ``w_e``, ``n_cov``, ``n_con``, ``s_cov``, ``s_con`` (lists
    of two jets for the vectors) and the array ``nbar``.
    """
    d = np.asarray(direction, dtype=float)
    nbar = np.stack([d[1], -d[0]])
    a = geom.a_cov
    we2 = a[0][0] * (d[0] * d[0]) + a[0][1] * (2.0 * d[0] * d[1]) + a[1][1] * (d[1] * d[1])
    w_e = we2.sqrt()
    inv_w = w_e.reciprocal()
    s_con = [inv_w * d[0], inv_w * d[1]]
    s_cov = [a[al][0] * s_con[0] + a[al][1] * s_con[1] for al in (0, 1)]
    fac = geom.sqrt_a * inv_w
    n_cov = [fac * nbar[0], fac * nbar[1]]
    ac = geom.a_con
    n_con = [ac[al][0] * n_cov[0] + ac[al][1] * n_cov[1] for al in (0, 1)]
    return {"w_e": w_e, "s_con": s_con, "s_cov": s_cov, "n_cov": n_cov, "n_con": n_con, "nbar": nbar}


def edge_frame(mesh: Mesh, edge: int, side: int, chart: Chart, s) -> EdgeFrame:
    """Frame at parameter(s) ``s ∈ [0, 1]`` along ``edge``, outward from triangle ``side``.

    The parameter runs along the stored orientation of the edge, so the two
    sides of an interior edge see the same physical points.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    va, vb = mesh.vertices[mesh.edges[edge]]
    x = va[None, :] + s[:, None] * (vb - va)[None, :]
    d = np.broadcast_to(mesh.edge_direction(edge, int(mesh.edge_elems[edge, side]))[:, None], (2, len(s)))
    g = eval_geometry(chart, x, order=0)
    fr = frame_jets(g, d)
    val = jets.value
    return EdgeFrame(
        n_cov=np.stack([val(c) for c in fr["n_cov"]]),
        n_con=np.stack([val(c) for c in fr["n_con"]]),
        s_cov=np.stack([val(c) for c in fr["s_cov"]]),
        s_con=np.stack([val(c) for c in fr["s_con"]]),
        w_e=val(fr["w_e"]),
        nbar=fr["nbar"],
        sqrt_a=g.sqrt_det,
    )
