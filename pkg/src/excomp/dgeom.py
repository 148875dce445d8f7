"""Discrete operators on triangulated immersed surfaces.

Everything is driven by the per-vertex extrinsic distance r: marching-
triangle clipping between level sets (extrinsic balls and annuli), level
polyline flux of r, cotangent-Laplacian Dirichlet and Poisson solves
(capacity, mean exit time), a membrane eigenvalue estimate, and counting of
ends as unbounded complement components.

Conventions: level comparisons treat a vertex with r exactly equal to the
level as lying above it (symbolic perturbation by one ulp), interpolated cut
vertices carry r equal to the level exactly, and negative cotangent weights
are clamped to zero so solves obey the discrete maximum principle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, splu

from .errors import (CoverageError, DomainError, SolveError, TruncationContactError)
from .surfaces import (TAG_TRUNCATION, TriMesh, barycentric_mass, cotangent_stiffness)

LABEL_INTERIOR = 0
LABEL_INNER = 1
LABEL_OUTER = 2
LABEL_TRUNCATION = 3

LABEL_NAMES = {LABEL_INTERIOR: "interior", LABEL_INNER: "inner level set",
               LABEL_OUTER: "outer level set", LABEL_TRUNCATION: "truncation"}


@dataclass(eq=False)
class Loop:
    vertices: np.ndarray
    closed: bool
    label: str  # 'inner' | 'outer' | 'truncation' | 'mixed'


@dataclass(eq=False)
class ClippedRegion:
    """Submesh between the extrinsic radii rho and R of a parent mesh.

    Cut triangles are split along the linear interpolant of r on edges; cut
    vertices carry r equal to the cut level exactly.  vertex_label marks the
    inner level set, outer level set and inherited truncation boundary.
    """

    verts: np.ndarray
    faces: np.ndarray
    r: np.ndarray
    parent_face: np.ndarray
    rho: float
    R: float
    parent_name: str
    vertex_label: np.ndarray
    boundary_loops: list = field(default_factory=list)

    def area(self) -> float:
        return float(_face_areas(self.verts, self.faces).sum())

    def n_vertices(self) -> int:
        return len(self.verts)

    def boundary_vertex_mask(self) -> np.ndarray:
        return self.vertex_label != LABEL_INTERIOR

    def has_label(self, label: int) -> bool:
        return bool(np.any(self.vertex_label == label))


def _face_areas(verts, faces) -> np.ndarray:
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _roll_rows(rows: np.ndarray, shift: np.ndarray) -> np.ndarray:
    cols = (shift[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(rows, cols, axis=1)


def _interp_edges(verts, r, pairs, level):
    """One vertex per unique undirected edge in `pairs`, placed where the
    linear interpolant of r reaches `level`.  Returns (points, inverse)."""
    if len(pairs) == 0:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    keys = lo * np.int64(len(verts)) + hi
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    i, j = lo[first], hi[first]
    denom = r[j] - r[i]
    t = (level - r[i]) / denom
    t = np.clip(t, 0.0, 1.0)
    pts = verts[i] + t[:, None] * (verts[j] - verts[i])
    return pts, inverse


def _clip_half(verts, r, faces, parent, level, keep_below):
    """Keep the part of each triangle on one side of the r = level line."""
    above = r >= level  # a vertex exactly at the level counts as above
    inside = ~above if keep_below else above
    fin = inside[faces]
    cnt = fin.sum(axis=1)

    out_faces = [faces[cnt == 3]]
    out_parent = [parent[cnt == 3]]
    new_pairs = []
    pending = []  # (kind, rotated faces, parent, slice of pair rows)

    m1 = cnt == 1
    if m1.any():
        f1 = _roll_rows(faces[m1], np.argmax(fin[m1], axis=1))
        new_pairs.append(np.column_stack([f1[:, 0], f1[:, 1]]))  # edge A-B
        new_pairs.append(np.column_stack([f1[:, 2], f1[:, 0]]))  # edge C-A
        pending.append(("tri", f1, parent[m1]))

    m2 = cnt == 2
    if m2.any():
        f2 = _roll_rows(faces[m2], np.argmax(~fin[m2], axis=1))  # v0 outside
        new_pairs.append(np.column_stack([f2[:, 0], f2[:, 1]]))  # edge v0-v1
        new_pairs.append(np.column_stack([f2[:, 2], f2[:, 0]]))  # edge v2-v0
        pending.append(("quad", f2, parent[m2]))

    if not new_pairs:
        return verts, r, np.concatenate(out_faces), np.concatenate(out_parent)

    pairs = np.concatenate(new_pairs)
    pts, inverse = _interp_edges(verts, r, pairs, level)
    base = len(verts)
    ids = base + inverse
    verts = np.concatenate([verts, pts])
    r = np.concatenate([r, np.full(len(pts), level)])

    cursor = 0
    for kind, f, par in pending:
        k = len(f)
        e1 = ids[cursor:cursor + k]
        e2 = ids[cursor + k:cursor + 2 * k]
        cursor += 2 * k
        if kind == "tri":
            tris = np.column_stack([f[:, 0], e1, e2])
            out_faces.append(tris)
            out_parent.append(par)
        else:
            # kept quad (v1, v2, I20, I01) fanned from v1
            out_faces.append(np.column_stack([f[:, 1], f[:, 2], e2]))
            out_faces.append(np.column_stack([f[:, 1], e2, e1]))
            out_parent.append(par)
            out_parent.append(par)
    return verts, r, np.concatenate(out_faces), np.concatenate(out_parent)


def clip(mesh: TriMesh, rho: float, R: float, face_mask=None,
         allow_truncation: bool = False) -> ClippedRegion:
    """Extrinsic annulus {rho <= r <= R} (ball when rho = 0) as a submesh.

    face_mask restricts the cut to a subset of parent faces.  Raises
    CoverageError when the truncation boundary of the mesh intrudes into
    the radius band (the region would leak through the computational
    window); allow_truncation accepts such windowed regions instead, for
    solves that handle the truncation boundary explicitly.
    """
    if not (0.0 <= rho < R):
        raise DomainError(f"need 0 <= rho < R, got rho={rho!r}, R={R!r}")
    faces = mesh.faces
    parent = np.arange(len(faces))
    if face_mask is not None:
        faces = faces[face_mask]
        parent = parent[face_mask]
    if not allow_truncation:
        _check_coverage(mesh, R, faces, rho=rho)
    verts = mesh.verts
    r = mesh.r
    verts, r, faces, parent = _clip_half(verts, r, faces, parent, R, keep_below=True)
    if rho > 0.0:
        verts, r, faces, parent = _clip_half(verts, r, faces, parent, rho, keep_below=False)

    # drop degenerate fragments produced by cuts through tie vertices
    if len(faces):
        areas = _face_areas(verts, faces)
        keep = areas > 1e-13 * max(areas.mean(), 1e-300)
        faces, parent = faces[keep], parent[keep]

    used = np.unique(faces)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    faces = remap[faces]
    verts = verts[used]
    rvals = r[used]

    orig_tags = np.zeros(len(verts), dtype=np.uint8)
    orig_mask = used < len(mesh.verts)
    orig_tags[orig_mask] = mesh.tags[used[orig_mask]]

    region = ClippedRegion(verts, faces, rvals, parent, rho, R, mesh.name,
                           np.zeros(len(verts), dtype=np.uint8))
    _label_boundary(region, orig_tags)
    return region


def _check_coverage(mesh: TriMesh, R: float, faces: np.ndarray, rho: float = 0.0):
    """The window leaks if a truncation vertex of the faces in use lies
    strictly inside the radius band (rho, R); vertices at or below rho are
    wholly outside the requested region and do not count."""
    used = np.unique(faces)
    trunc = used[mesh.tags[used] == TAG_TRUNCATION]
    if len(trunc):
        rv = mesh.r[trunc]
        inside = (rv > rho) & (rv < R)
        if inside.any():
            raise CoverageError(
                f"truncation boundary of {mesh.name!r} intrudes at r={rv[inside].min():.6g} "
                f"inside the requested band ({rho:.6g}, {R:.6g})", R)


def _label_boundary(region: ClippedRegion, orig_tags):
    f = region.faces
    n = len(region.verts)
    if len(f) == 0:
        raise DomainError("clip produced an empty region")
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    keys = und[:, 0] * np.int64(n) + und[:, 1]
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    uniq, starts, counts = np.unique(sk, return_index=True, return_counts=True)
    boundary_keys = uniq[counts == 1]
    boundary_rows = order[starts[counts == 1]]
    bedges = directed[boundary_rows]

    eps_in = 1e-9 * max(1.0, region.rho)
    eps_out = 1e-9 * max(1.0, region.R)
    rv = region.r
    labels = region.vertex_label

    def edge_label(a, b):
        if region.rho > 0 and abs(rv[a] - region.rho) <= eps_in and abs(rv[b] - region.rho) <= eps_in:
            return "inner"
        if abs(rv[a] - region.R) <= eps_out and abs(rv[b] - region.R) <= eps_out:
            return "outer"
        return "truncation"

    elabels = [edge_label(a, b) for a, b in bedges]
    for (a, b), lab in zip(bedges, elabels):
        code = {"inner": LABEL_INNER, "outer": LABEL_OUTER, "truncation": LABEL_TRUNCATION}[lab]
        for vtx in (a, b):
            # level labels win over truncation at corner vertices
            if labels[vtx] == LABEL_INTERIOR or (labels[vtx] == LABEL_TRUNCATION and code != LABEL_TRUNCATION):
                labels[vtx] = code

    region.boundary_loops = _walk_loops(bedges, elabels)


def _walk_loops(bedges, elabels):
    nxt: dict[int, list[tuple[int, str]]] = {}
    for (a, b), lab in zip(bedges, elabels):
        nxt.setdefault(int(a), []).append((int(b), lab))
    for v in nxt:
        nxt[v].sort()
    loops = []
    visited = set()
    for start in sorted(nxt):
        while nxt[start]:
            if (start, nxt[start][0][0]) in visited:
                nxt[start].pop(0)
                continue
            chain = [start]
            labs = set()
            cur = start
            closed = False
            while True:
                options = nxt.get(cur, [])
                hop = None
                while options:
                    cand = options[0]
                    if (cur, cand[0]) in visited:
                        options.pop(0)
                        continue
                    hop = cand
                    options.pop(0)
                    break
                if hop is None:
                    break
                visited.add((cur, hop[0]))
                labs.add(hop[1])
                cur = hop[0]
                if cur == start:
                    closed = True
                    break
                chain.append(cur)
            if len(chain) > 1 or closed:
                label = labs.pop() if len(labs) == 1 else "mixed"
                loops.append(Loop(np.array(chain), closed, label))
            else:
                break
    return loops


def region_area(region: ClippedRegion) -> float:
    if len(region.faces) == 0:
        raise DomainError("empty region")
    return region.area()


# ---------------------------------------------------------------------------
# radial gradient and flux


def radial_gradient_norms(verts, faces, pole) -> np.ndarray:
    """|grad of r along the surface| per face: the ambient unit radial
    direction at the face centroid projected onto the face plane."""
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    centroid = (a + b + c) / 3.0
    d = centroid - np.asarray(pole, float)
    dn = np.linalg.norm(d, axis=1)
    if np.any(dn < 1e-14):
        raise DomainError("face centroid coincides with the pole")
    d /= dn[:, None]
    nrm = np.cross(b - a, c - a)
    nn = np.linalg.norm(nrm, axis=1)
    if np.any(nn < 1e-300):
        raise DomainError("degenerate face in radial gradient computation")
    nrm /= nn[:, None]
    dot = (d * nrm).sum(axis=1)
    vals = np.sqrt(np.clip(1.0 - dot * dot, 0.0, 1.0))
    return vals


def radial_gradient_norm(mesh: TriMesh, face: int) -> float:
    """Single-face value in [0, 1]."""
    return float(radial_gradient_norms(mesh.verts, mesh.faces[face:face + 1], mesh.pole)[0])


def flux(mesh: TriMesh, R: float, face_mask=None) -> float:
    """Flux of the extrinsic distance through the level r = R: the level
    polyline is extracted by marching triangles and |grad r| (per face, by
    ambient projection) is integrated against segment length."""
    if R <= 0:
        raise DomainError(f"level radius must be positive, got {R!r}")
    faces = mesh.faces
    if face_mask is not None:
        faces = faces[face_mask]
    _check_coverage(mesh, R, faces)
    above = mesh.r >= R
    fin = above[faces]
    cnt = fin.sum(axis=1)
    total = 0.0
    for count, odd_above in ((1, True), (2, False)):
        m = cnt == count
        if not m.any():
            continue
        sel = fin[m] if odd_above else ~fin[m]
        f = _roll_rows(faces[m], np.argmax(sel, axis=1))
        r0, r1, r2 = mesh.r[f[:, 0]], mesh.r[f[:, 1]], mesh.r[f[:, 2]]
        t1 = (R - r0) / (r1 - r0)
        t2 = (R - r0) / (r2 - r0)
        p1 = mesh.verts[f[:, 0]] + t1[:, None] * (mesh.verts[f[:, 1]] - mesh.verts[f[:, 0]])
        p2 = mesh.verts[f[:, 0]] + t2[:, None] * (mesh.verts[f[:, 2]] - mesh.verts[f[:, 0]])
        seg = np.linalg.norm(p1 - p2, axis=1)
        w = radial_gradient_norms(mesh.verts, f, mesh.pole)
        total += float((w * seg).sum())
    return total


def radial_energy(mesh: TriMesh, region: ClippedRegion) -> float:
    """Integral of |grad r|^2 over the region (per-face ambient projection)."""
    w = radial_gradient_norms(mesh.verts, mesh.faces[region.parent_face], mesh.pole)
    areas = _face_areas(region.verts, region.faces)
    return float((w * w * areas).sum())


# ---------------------------------------------------------------------------
# Laplacian systems


@dataclass(eq=False)
class SparseSPDSystem:
    """Cotangent stiffness with Dirichlet data and a lumped mass vector."""

    K: sparse.csr_matrix
    mass: np.ndarray
    constrained: np.ndarray
    values: np.ndarray

    def free_mask(self) -> np.ndarray:
        mask = np.ones(self.K.shape[0], dtype=bool)
        mask[self.constrained] = False
        return mask


def assemble_laplacian(region: ClippedRegion, boundary_spec: dict) -> SparseSPDSystem:
    """Stiffness and lumped mass for the region; boundary_spec maps the loop
    labels 'inner', 'outer', 'truncation' to Dirichlet values.  Labels not
    in the spec are left free (natural zero-Neumann in the weak form)."""
    unknown = set(boundary_spec) - {"inner", "outer", "truncation"}
    if unknown:
        raise DomainError(f"unknown boundary labels {sorted(unknown)}")
    K, _ = cotangent_stiffness(region.verts, region.faces, clamp=True)
    mass = barycentric_mass(region.verts, region.faces)
    code = {"inner": LABEL_INNER, "outer": LABEL_OUTER, "truncation": LABEL_TRUNCATION}
    cons = []
    vals = []
    for label in ("inner", "outer", "truncation"):
        if label in boundary_spec:
            idx = np.flatnonzero(region.vertex_label == code[label])
            cons.append(idx)
            vals.append(np.full(len(idx), float(boundary_spec[label])))
    constrained = np.concatenate(cons) if cons else np.zeros(0, dtype=np.int64)
    values = np.concatenate(vals) if vals else np.zeros(0)
    if len(constrained) == 0:
        raise DomainError("system has no Dirichlet constraints")
    return SparseSPDSystem(K, mass, constrained, values)


def solve_dirichlet(system: SparseSPDSystem, source: np.ndarray | None = None,
                    rtol: float = 1e-10) -> np.ndarray:
    """Solve K u = source with the stored Dirichlet values in place, by
    Jacobi-preconditioned conjugate gradients to the given relative
    residual.  With clamped weights the harmonic case obeys the discrete
    maximum principle."""
    n = system.K.shape[0]
    free = system.free_mask()
    nfree = int(free.sum())
    field = np.zeros(n)
    field[system.constrained] = system.values
    if nfree == 0:
        return field
    Kff = system.K[free][:, free]
    rhs = -system.K[free][:, ~free] @ field[~free]
    if source is not None:
        rhs = rhs + source[free]
    diag = Kff.diagonal()
    diag = np.where(diag > 0, diag, 1.0)
    precond = sparse.diags(1.0 / diag)
    maxiter = max(5000, int(40 * math.sqrt(nfree)))
    x, info = cg(Kff, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=precond)
    if info != 0:
        res = float(np.linalg.norm(Kff @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
        raise SolveError(f"conjugate gradients did not converge in {maxiter} iterations",
                         residual=res)
    field[free] = x
    return field


@dataclass(eq=False)
class CapacityResult:
    capacity: float
    effective_resistance: float
    field: np.ndarray


def capacity_discrete(region: ClippedRegion, truncation: str = "reflect",
                      rtol: float = 1e-10) -> CapacityResult:
    """Capacity of the annulus: the Dirichlet energy of the potential that
    is 0 on the inner level set and 1 on the outer one.  Truncation
    boundary is either reflected (natural condition) or a hard error."""
    if truncation not in ("reflect", "error"):
        raise DomainError(f"unknown truncation policy {truncation!r}")
    if not region.has_label(LABEL_INNER):
        raise DomainError("capacity needs an inner level boundary (rho > 0)")
    if not region.has_label(LABEL_OUTER):
        raise DomainError("capacity needs an outer level boundary")
    if truncation == "error" and region.has_label(LABEL_TRUNCATION):
        raise TruncationContactError(
            "region touches the mesh truncation boundary under policy 'error'")
    h = _mean_edge_length(region)
    if region.R - region.rho < 2.0 * h:
        raise DomainError(
            f"annulus width {region.R - region.rho:.4g} under 2 mesh edge lengths ({2 * h:.4g})")
    system = assemble_laplacian(region, {"inner": 0.0, "outer": 1.0})
    psi = solve_dirichlet(system, rtol=rtol)
    cap = float(psi @ (system.K @ psi))
    return CapacityResult(cap, 1.0 / cap, psi)


def exit_time_discrete(region: ClippedRegion, rtol: float = 1e-10) -> np.ndarray:
    """Per-vertex mean exit time of the extrinsic ball: K E = M 1 with E = 0
    on the outer level set."""
    if region.has_label(LABEL_INNER):
        raise DomainError("exit time is defined on an extrinsic ball (rho = 0)")
    if region.has_label(LABEL_TRUNCATION):
        raise TruncationContactError("extrinsic ball touches the truncation boundary")
    system = assemble_laplacian(region, {"outer": 0.0})
    return solve_dirichlet(system, source=system.mass, rtol=rtol)


def first_eigenvalue_estimate(region: ClippedRegion, tol: float = 1e-8,
                              maxiter: int = 500) -> float:
    """Smallest Dirichlet eigenvalue of (K, M) on the region by inverse
    power iteration (direct factorization of the free block)."""
    K, _ = cotangent_stiffness(region.verts, region.faces, clamp=True)
    mass = barycentric_mass(region.verts, region.faces)
    free = ~region.boundary_vertex_mask()
    nfree = int(free.sum())
    if nfree == 0:
        raise DomainError("region has no interior vertices")
    Kff = K[free][:, free].tocsc()
    mf = mass[free]
    lu = splu(Kff)
    x = np.ones(nfree)
    x /= math.sqrt(float((x * x * mf).sum()))
    lam_prev = None
    for _ in range(maxiter):
        x = lu.solve(mf * x)
        x /= math.sqrt(float((x * x * mf).sum()))
        lam = float(x @ (Kff @ x)) / float((x * x * mf).sum())
        if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
            return lam
        lam_prev = lam
    raise SolveError("inverse power iteration did not converge",
                     residual=abs(lam - lam_prev))


def _mean_edge_length(region: ClippedRegion) -> float:
    f = region.faces
    n = len(region.verts)
    und = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    keys = und[:, 0] * np.int64(n) + und[:, 1]
    uniq = np.unique(keys)
    i, j = uniq // n, uniq % n
    return float(np.linalg.norm(region.verts[i] - region.verts[j], axis=1).mean())


# ---------------------------------------------------------------------------
# ends


@dataclass(eq=False)
class EndsResult:
    count: int
    face_masks: list  # per counted component, boolean over parent faces
    warning: str | None


def end_components(mesh: TriMesh, R: float) -> EndsResult:
    """Connected components of the complement submesh {r > R} that touch the
    truncation boundary (the discrete proxy for non-compact closure)."""
    if R <= 0:
        raise DomainError(f"level radius must be positive, got {R!r}")
    warning = None
    if mesh.max_r() < 2.0 * R:
        warning = (f"complement components probed at R={R:.4g} but the window only "
                   f"reaches r={mesh.max_r():.4g} (< 2R); the count may be unstable")
    above = mesh.r > R
    keep = above[mesh.faces].all(axis=1)
    sub = mesh.faces[keep]
    if len(sub) == 0:
        return EndsResult(0, [], warning)
    n = len(mesh.verts)
    edges = np.concatenate([sub[:, [0, 1]], sub[:, [1, 2]], sub[:, [2, 0]]])
    graph = sparse.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    ncomp, labels = sparse.csgraph.connected_components(graph, directed=False)
    face_label = labels[sub[:, 0]]
    trunc = mesh.tags == TAG_TRUNCATION
    masks = []
    for comp in np.unique(face_label):
        comp_verts = np.unique(sub[face_label == comp])
        if trunc[comp_verts].any():
            mask = np.zeros(len(mesh.faces), dtype=bool)
            mask[np.flatnonzero(keep)[face_label == comp]] = True
            masks.append(mask)
    return EndsResult(len(masks), masks, warning)


def count_ends(mesh: TriMesh, R: float) -> int:
    return end_components(mesh, R).count
