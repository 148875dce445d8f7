"""Triangulated surfaces immersed in Euclidean 3-space.

Builds meshes from analytic parametrizations of classical minimal surfaces
(plane, catenoid, helicoid, Enneper), ingests ASCII OFF/OBJ files, and
attaches the extrinsic distance r to a chosen pole per vertex.  Meshes are
edge-manifold, consistently oriented, and immutable once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse

from .errors import CoverageError, DomainError, MeshFormatError, NonManifoldError

TAG_INTERIOR = 0
TAG_TRUNCATION = 1
TAG_SEAM = 2

TAG_NAMES = {TAG_INTERIOR: "interior", TAG_TRUNCATION: "outer-truncation", TAG_SEAM: "seam"}


@dataclass(frozen=True)
class ParamSurface:
    """A parametrized surface patch (u,v) -> R^3 on a rectangle.

    The map must be an immersion on the rectangle interior; this is checked
    by sampling the Jacobian at construction.
    """

    name: str
    fn: Callable[[np.ndarray, np.ndarray], tuple]
    u0: float
    u1: float
    v0: float
    v1: float
    periodic_u: bool = False
    periodic_v: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.u1 > self.u0 and self.v1 > self.v0):
            raise DomainError("parameter rectangle must be nondegenerate")
        self._check_immersion()

    def _check_immersion(self, n: int = 17):
        us = np.linspace(self.u0, self.u1, n + 2)[1:-1]
        vs = np.linspace(self.v0, self.v1, n + 2)[1:-1]
        U, V = np.meshgrid(us, vs, indexing="ij")
        hu = (self.u1 - self.u0) * 1e-6
        hv = (self.v1 - self.v0) * 1e-6
        xu = (np.stack(self.fn(U + hu, V), axis=-1) - np.stack(self.fn(U - hu, V), axis=-1)) / (2 * hu)
        xv = (np.stack(self.fn(U, V + hv), axis=-1) - np.stack(self.fn(U, V - hv), axis=-1)) / (2 * hv)
        cross = np.cross(xu, xv)
        norms = np.linalg.norm(cross, axis=-1)
        scale = np.linalg.norm(xu, axis=-1) * np.linalg.norm(xv, axis=-1) + 1e-300
        if np.any(norms / scale < 1e-8):
            raise DomainError(f"map for {self.name!r} is not an immersion on the rectangle")

    def points(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        x, y, z = self.fn(U, V)
        return np.stack([np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)], axis=-1)

    def boundary_min_radius(self, pole=(0.0, 0.0, 0.0), n: int = 512) -> float:
        """Smallest extrinsic distance over the non-periodic rectangle edges."""
        pole = np.asarray(pole, float)
        best = math.inf
        ts = np.linspace(0.0, 1.0, n)
        edges = []
        if not self.periodic_v:
            edges.append((self.u0 + ts * (self.u1 - self.u0), np.full(n, self.v0)))
            edges.append((self.u0 + ts * (self.u1 - self.u0), np.full(n, self.v1)))
        if not self.periodic_u:
            edges.append((np.full(n, self.u0), self.v0 + ts * (self.v1 - self.v0)))
            edges.append((np.full(n, self.u1), self.v0 + ts * (self.v1 - self.v0)))
        for U, V in edges:
            pts = self.points(U, V)
            best = min(best, float(np.linalg.norm(pts - pole, axis=1).min()))
        return best


BUILTIN_NAMES = ("plane", "catenoid", "helicoid", "enneper")

_COVER_MARGIN = 1.1


def builtin(name: str, a: float = 1.0, c: float = 1.0, cover_radius: float | None = None,
            extent: float | None = None) -> ParamSurface:
    """Standard parametrizations of the built-in surfaces.

    cover_radius asks for a rectangle whose image reaches extrinsic radius
    cover_radius * 1.1 along every truncation edge (so that clipping at
    cover_radius never leaks through the computational window).
    """
    if name == "plane":
        L = extent if extent is not None else (_COVER_MARGIN * cover_radius if cover_radius else 8.0)
        return ParamSurface("plane", lambda u, v: (u, v, np.zeros_like(u + v)),
                            -L, L, -L, L, params={"extent": L})
    if name == "catenoid":
        if a <= 0:
            raise DomainError(f"catenoid neck radius must be positive, got {a!r}")
        if extent is not None:
            v1 = extent
        elif cover_radius:
            v1 = math.acosh(max(_COVER_MARGIN * cover_radius / a, 2.0))
        else:
            v1 = 3.0

        def cat(u, v):
            return (a * np.cosh(v) * np.cos(u), a * np.cosh(v) * np.sin(u), a * v)

        return ParamSurface("catenoid", cat, 0.0, 2 * math.pi, -v1, v1,
                            periodic_u=True, params={"a": a, "v1": v1})
    if name == "helicoid":
        if c <= 0:
            raise DomainError(f"helicoid pitch must be positive, got {c!r}")
        if extent is not None:
            U = V = extent
        else:
            reach = _COVER_MARGIN * cover_radius if cover_radius else 8.0
            U, V = reach / c, reach

        def heli(u, v):
            return (v * np.cos(u), v * np.sin(u), c * u)

        return ParamSurface("helicoid", heli, -U, U, -V, V, params={"c": c, "U": U, "V": V})
    if name == "enneper":
        def enn(u, v):
            return (u - u ** 3 / 3 + u * v * v, -v + v ** 3 / 3 - v * u * u, u * u - v * v)

        if extent is not None:
            E = extent
        elif cover_radius:
            E = _enneper_extent(enn, _COVER_MARGIN * cover_radius)
        else:
            E = 2.0
        return ParamSurface("enneper", enn, -E, E, -E, E, params={"extent": E})
    raise DomainError(f"unknown builtin surface {name!r}; have {BUILTIN_NAMES}")


def _enneper_extent(fn, target: float, n: int = 512) -> float:
    # grow the square until every boundary point is at least `target` away
    E = 1.0
    for _ in range(200):
        ts = np.linspace(-E, E, n)
        const = np.full(n, E)
        best = math.inf
        for U, V in ((ts, const), (ts, -const), (const, ts), (-const, ts)):
            x, y, z = fn(U, V)
            best = min(best, float(np.sqrt(np.asarray(x) ** 2 + np.asarray(y) ** 2
                                           + np.asarray(z) ** 2).min()))
        if best >= target:
            return E
        E *= 1.08
    raise DomainError(f"could not find an Enneper extent covering radius {target!r}")


class TriMesh:
    """Immersed triangle mesh with per-vertex extrinsic distance.

    verts: (n,3) float64; faces: (m,3) int; r[i] = |verts[i] - pole|;
    tags[i] in {interior, outer-truncation, seam}.  Arrays are frozen after
    construction; every interior edge is shared by exactly two consistently
    oriented triangles.
    """

    def __init__(self, verts, faces, pole=(0.0, 0.0, 0.0), tags=None, name="mesh",
                 validate: bool = True):
        self.verts = np.ascontiguousarray(verts, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        self.pole = np.asarray(pole, dtype=np.float64).reshape(3)
        self.name = name
        if self.verts.ndim != 2 or self.verts.shape[1] != 3:
            raise DomainError("verts must be (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise DomainError("faces must be (m, 3)")
        self.r = np.linalg.norm(self.verts - self.pole, axis=1)
        self.tags = (np.zeros(len(self.verts), dtype=np.uint8) if tags is None
                     else np.asarray(tags, dtype=np.uint8).copy())
        if validate:
            self._validate()
        for arr in (self.verts, self.faces, self.r, self.tags, self.pole):
            arr.setflags(write=False)

    def _validate(self):
        f = self.faces
        n = len(self.verts)
        if f.size and (f.min() < 0 or f.max() >= n):
            raise DomainError("face index out of range")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise DomainError("face with repeated vertices")
        # every undirected edge in at most 2 faces; consistent orientation means
        # each directed edge appears at most once
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        und = np.sort(directed, axis=1)
        keys = und[:, 0] * np.int64(n) + und[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 2):
            bad = uniq[counts > 2]
            edges = [(int(k // n), int(k % n)) for k in bad[:16]]
            raise NonManifoldError(edges)
        dkeys = directed[:, 0] * np.int64(n) + directed[:, 1]
        duniq, dcounts = np.unique(dkeys, return_counts=True)
        if np.any(dcounts > 1):
            bad = duniq[dcounts > 1]
            edges = [(int(k // n), int(k % n)) for k in bad[:16]]
            raise DomainError(f"inconsistently oriented edges: {edges}")

    # -- derived quantities -------------------------------------------------

    def recompute_r(self) -> np.ndarray:
        return np.linalg.norm(self.verts - self.pole, axis=1)

    def face_areas(self) -> np.ndarray:
        a = self.verts[self.faces[:, 0]]
        b = self.verts[self.faces[:, 1]]
        c = self.verts[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def max_r(self) -> float:
        return float(self.r.max())

    def boundary_vertex_mask(self) -> np.ndarray:
        f = self.faces
        n = len(self.verts)
        und = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        keys = und[:, 0] * np.int64(n) + und[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        boundary = uniq[counts == 1]
        mask = np.zeros(n, dtype=bool)
        mask[boundary // n] = True
        mask[boundary % n] = True
        return mask

    def save_off(self, path):
        with open(path, "w") as fh:
            fh.write("OFF\n")
            fh.write(f"{len(self.verts)} {len(self.faces)} 0\n")
            for p in self.verts:
                fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
            for t in self.faces:
                fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def tessellate(surface: ParamSurface, nu: int, nv: int, refine_near=(),
               pole=(0.0, 0.0, 0.0)) -> TriMesh:
    """Regular-grid triangulation of the patch, stitched along periodic axes.

    Triangles whose extrinsic-radius range crosses any radius in refine_near
    receive one round of 1-to-4 subdivision (neighbors are bisected to keep
    the mesh conforming); midpoints are re-evaluated through the surface map.
    """
    if nu < 8 or nv < 8:
        raise DomainError(f"need nu, nv >= 8, got {nu}, {nv}")
    pu, pv = surface.periodic_u, surface.periodic_v
    ucount = nu if pu else nu + 1
    vcount = nv if pv else nv + 1
    us = np.linspace(surface.u0, surface.u1, nu + 1)[:ucount]
    vs = np.linspace(surface.v0, surface.v1, nv + 1)[:vcount]
    U, V = np.meshgrid(us, vs, indexing="ij")
    verts = surface.points(U, V).reshape(-1, 3)
    uv = np.stack([U.ravel(), V.ravel()], axis=1)

    def vid(i, j):
        return (i % ucount) * vcount + (j % vcount)

    i = np.arange(nu)
    j = np.arange(nv)
    I, J = np.meshgrid(i, j, indexing="ij")
    v00 = vid(I, J)
    v10 = vid(I + 1, J)
    v11 = vid(I + 1, J + 1)
    v01 = vid(I, J + 1)
    t1 = np.stack([v00, v10, v11], axis=-1).reshape(-1, 3)
    t2 = np.stack([v00, v11, v01], axis=-1).reshape(-1, 3)
    faces = np.concatenate([t1, t2])

    tags = np.zeros(len(verts), dtype=np.uint8)
    gi = np.arange(len(verts)) // vcount
    gj = np.arange(len(verts)) % vcount
    if not pu:
        tags[(gi == 0) | (gi == nu)] = TAG_TRUNCATION
    else:
        tags[gi == 0] = TAG_SEAM
    if not pv:
        tags[(gj == 0) | (gj == nv)] = TAG_TRUNCATION
    else:
        tags[np.logical_and(gj == 0, tags == TAG_INTERIOR)] = TAG_SEAM

    if refine_near:
        verts, faces, tags, uv = _refine_once(surface, verts, faces, tags, uv,
                                              np.asarray(pole, float), refine_near)

    mesh = TriMesh(verts, faces, pole=pole, tags=tags, name=surface.name)

    areas = mesh.face_areas()
    tiny = areas < 1e-14 * areas.mean()
    if tiny.any():
        idx = np.flatnonzero(tiny)[:8]
        raise DomainError(
            f"tessellation produced {int(tiny.sum())} degenerate triangles "
            f"(area < 1e-14 of mean), e.g. faces {idx.tolist()}"
        )
    if refine_near:
        needed = 1.2 * max(refine_near)
        trunc = mesh.tags == TAG_TRUNCATION
        if trunc.any() and mesh.r[trunc].min() < needed:
            raise CoverageError(
                f"surface window covers radius {mesh.r[trunc].min():.4g} "
                f"but refinement asks for {needed:.4g}", needed)
    return mesh


def _refine_once(surface, verts, faces, tags, uv, pole, radii):
    r = np.linalg.norm(verts - pole, axis=1)
    fr = r[faces]
    lo, hi = fr.min(axis=1), fr.max(axis=1)
    marked_face = np.zeros(len(faces), dtype=bool)
    for rad in radii:
        marked_face |= (lo <= rad) & (hi >= rad)

    n = len(verts)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    ekeys = np.sort(edges, axis=1)
    ekeys = ekeys[:, 0] * np.int64(n) + ekeys[:, 1]
    split = {}

    def mark_edges_of(face_mask):
        for k in np.unique(ekeys.reshape(3, -1)[:, face_mask]):
            split[int(k)] = None

    mark_edges_of(marked_face)
    # propagate: a face with 2+ split edges becomes fully split
    face_ekeys = ekeys.reshape(3, -1).T
    while True:
        counts = np.isin(face_ekeys, np.fromiter(split.keys(), dtype=np.int64)).sum(axis=1)
        promote = (counts >= 2) & ~marked_face
        if not promote.any():
            break
        marked_face |= promote
        mark_edges_of(promote)

    period_u = surface.u1 - surface.u0 if surface.periodic_u else None
    period_v = surface.v1 - surface.v0 if surface.periodic_v else None

    new_uv = []
    for k in split:
        i, j = int(k // n), int(k % n)
        a, b = uv[i].copy(), uv[j].copy()
        if period_u is not None and abs(a[0] - b[0]) > period_u / 2:
            if a[0] < b[0]:
                a[0] += period_u
            else:
                b[0] += period_u
        if period_v is not None and abs(a[1] - b[1]) > period_v / 2:
            if a[1] < b[1]:
                a[1] += period_v
            else:
                b[1] += period_v
        split[k] = n + len(new_uv)
        new_uv.append(0.5 * (a + b))
    new_uv = np.array(new_uv).reshape(-1, 2)
    mids = surface.points(new_uv[:, 0], new_uv[:, 1]) if len(new_uv) else np.zeros((0, 3))

    # midpoint tags: truncation only when the edge lies on the truncation boundary
    und = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    ukeys = und[:, 0] * np.int64(n) + und[:, 1]
    uniqk, counts = np.unique(ukeys, return_counts=True)
    boundary_keys = set(uniqk[counts == 1].tolist())
    new_tags = []
    for k, idx in split.items():
        i, j = int(k // n), int(k % n)
        if k in boundary_keys and tags[i] == TAG_TRUNCATION and tags[j] == TAG_TRUNCATION:
            new_tags.append(TAG_TRUNCATION)
        else:
            new_tags.append(TAG_INTERIOR)

    out = []
    for fidx, tri in enumerate(faces):
        ks = [int(x) for x in face_ekeys[fidx]]
        m01, m12, m20 = (split.get(ks[0]), split.get(ks[1]), split.get(ks[2]))
        a, b, c = (int(x) for x in tri)
        if marked_face[fidx]:
            out += [(a, m01, m20), (m01, b, m12), (m20, m12, c), (m01, m12, m20)]
        else:
            present = [m is not None for m in (m01, m12, m20)]
            if not any(present):
                out.append((a, b, c))
            else:
                # green bisection through the single split edge
                if m01 is not None:
                    out += [(a, m01, c), (m01, b, c)]
                elif m12 is not None:
                    out += [(a, b, m12), (a, m12, c)]
                else:
                    out += [(a, b, m20), (m20, b, c)]
    verts = np.concatenate([verts, mids])
    uv = np.concatenate([uv, new_uv])
    tags = np.concatenate([tags, np.array(new_tags, dtype=np.uint8)])
    return verts, np.array(out, dtype=np.int64), tags, uv


# ---------------------------------------------------------------------------
# file ingestion


def load_mesh(path, fmt: str | None = None, pole=(0.0, 0.0, 0.0)) -> TriMesh:
    """Read an ASCII OFF or OBJ file (positions and faces only).

    Polygonal faces are fan-triangulated.  Boundary vertices are tagged as
    outer-truncation; non-manifold input raises with the offending edges.
    """
    path = str(path)
    if fmt is None:
        fmt = "obj" if path.lower().endswith(".obj") else "off"
    fmt = fmt.lower()
    if fmt == "off":
        verts, polys = _read_off(path)
    elif fmt == "obj":
        verts, polys = _read_obj(path)
    else:
        raise DomainError(f"unknown mesh format {fmt!r}")
    faces = []
    for lineno, poly in polys:
        if len(poly) < 3:
            raise MeshFormatError(f"face with {len(poly)} vertices", lineno)
        for k in range(1, len(poly) - 1):
            faces.append((poly[0], poly[k], poly[k + 1]))
    mesh = TriMesh(np.array(verts, dtype=float), np.array(faces, dtype=np.int64),
                   pole=pole, name=path)
    tags = np.zeros(len(verts), dtype=np.uint8)
    tags[mesh.boundary_vertex_mask()] = TAG_TRUNCATION
    return TriMesh(mesh.verts, mesh.faces, pole=pole, tags=tags, name=path)


def _read_off(path):
    with open(path) as fh:
        lines = fh.readlines()
    idx = 0

    def next_data_line():
        nonlocal idx
        while idx < len(lines):
            stripped = lines[idx].split("#", 1)[0].strip()
            idx += 1
            if stripped:
                return stripped, idx
        return None, idx

    header, lineno = next_data_line()
    if header is None or header.upper() != "OFF":
        raise MeshFormatError("missing OFF header", lineno if header else 1)
    counts, lineno = next_data_line()
    try:
        nv, nf = int(counts.split()[0]), int(counts.split()[1])
    except (ValueError, IndexError):
        raise MeshFormatError(f"malformed count line {counts!r}", lineno)
    verts = []
    for _ in range(nv):
        line, lineno = next_data_line()
        if line is None:
            raise MeshFormatError("unexpected end of file in vertex block", lineno)
        parts = line.split()
        try:
            verts.append((float(parts[0]), float(parts[1]), float(parts[2])))
        except (ValueError, IndexError):
            raise MeshFormatError(f"malformed vertex {line!r}", lineno)
    polys = []
    for _ in range(nf):
        line, lineno = next_data_line()
        if line is None:
            raise MeshFormatError("unexpected end of file in face block", lineno)
        parts = line.split()
        try:
            k = int(parts[0])
            poly = [int(x) for x in parts[1:1 + k]]
            if len(poly) != k:
                raise ValueError
        except ValueError:
            raise MeshFormatError(f"malformed face {line!r}", lineno)
        polys.append((lineno, poly))
    return verts, polys


def _read_obj(path):
    verts = []
    polys = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "v":
                try:
                    verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except (ValueError, IndexError):
                    raise MeshFormatError(f"malformed vertex {line!r}", lineno)
            elif parts[0] == "f":
                poly = []
                for tok in parts[1:]:
                    try:
                        idx = int(tok.split("/")[0])
                    except ValueError:
                        raise MeshFormatError(f"malformed face token {tok!r}", lineno)
                    poly.append(idx - 1 if idx > 0 else len(verts) + idx)
                polys.append((lineno, poly))
    return verts, polys


# ---------------------------------------------------------------------------
# discrete minimality diagnostic


def minimality_residual(mesh: TriMesh, percentile: float = 95.0) -> float:
    """Magnitude of the discrete mean-curvature vector, area-normalized.

    Applies the cotangent operator to the coordinate functions and divides
    by the barycentric one-ring area; for a smooth surface this converges to
    twice the mean curvature, so a unit sphere reads about 2 and a minimal
    surface tends to 0 under refinement.  Returns the given percentile over
    interior vertices.
    """
    K, _ = cotangent_stiffness(mesh.verts, mesh.faces, clamp=False)
    mass = barycentric_mass(mesh.verts, mesh.faces)
    lap = np.column_stack([K @ mesh.verts[:, k] for k in range(3)])
    with np.errstate(divide="ignore", invalid="ignore"):
        hn = np.linalg.norm(lap, axis=1) / mass
    interior = ~mesh.boundary_vertex_mask()
    if not interior.any():
        raise DomainError("mesh has no interior vertices")
    return float(np.percentile(hn[interior], percentile))


def cotangent_stiffness(verts, faces, clamp: bool = True):
    """Cotangent-weight stiffness matrix (CSR) and the per-edge weight COO.

    With clamp=True negative edge weights are zeroed, which keeps the matrix
    an M-matrix so discrete solutions obey the maximum principle.
    """
    v = np.asarray(verts, float)
    f = np.asarray(faces)
    n = len(v)
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    # cot of the angle at each corner = dot of adjacent edges / twice area
    cots = np.empty((len(f), 3))
    for k, (a, b, c) in enumerate(((p0, p1, p2), (p1, p2, p0), (p2, p0, p1))):
        e1 = b - a
        e2 = c - a
        cross = np.linalg.norm(np.cross(e1, e2), axis=1)
        cross = np.maximum(cross, 1e-300)
        cots[:, k] = (e1 * e2).sum(axis=1) / cross
    # the corner angle is opposite the edge joining the other two vertices
    rows = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    cols = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    w = 0.5 * np.concatenate([cots[:, 0], cots[:, 1], cots[:, 2]])
    W = sparse.coo_matrix((w, (rows, cols)), shape=(n, n))
    W = (W + W.T).tocsr()
    if clamp:
        W.data = np.maximum(W.data, 0.0)
    diag = np.asarray(W.sum(axis=1)).ravel()
    K = sparse.diags(diag) - W
    return K.tocsr(), W


def barycentric_mass(verts, faces) -> np.ndarray:
    v = np.asarray(verts, float)
    f = np.asarray(faces)
    areas = 0.5 * np.linalg.norm(
        np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    mass = np.zeros(len(v))
    np.add.at(mass, f[:, 0], areas / 3.0)
    np.add.at(mass, f[:, 1], areas / 3.0)
    np.add.at(mass, f[:, 2], areas / 3.0)
    return mass
