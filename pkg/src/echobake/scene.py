"""Scene loading and geometric queries.

A scene is an immutable triangle soup with per-triangle materials, loaded
from a small OBJ subset plus a JSON material table. Geometry queries come
in two flavours: `Scene.intersect` (BVH-accelerated, used for point
queries such as occlusion tests) and `Scene.intersect_brute` (exhaustive,
kept as the reference oracle). `analytic_volume_and_area` gives the closed
forms the mean-free-path estimator is validated against and is the only
operation that requires a watertight mesh.

Supported mesh text, line by line:

* ``v x y z`` vertex position
* ``f i j k`` triangular face, 1-based vertex indices (``i/..`` forms are
  accepted and only the position index is used)
* ``usemtl name`` material for subsequent faces
* ``#`` comments; ``o``/``g``/``s``/``mtllib``/``vn``/``vt`` are ignored

Anything else is a parse error carrying its line number.

Material table (JSON)::

    {
      "band_edges_hz": [0, 176, 775, 3408, 22050],   // optional
      "materials": {"walls": [0.10, 0.12, 0.20, 0.30]}
    }

Faces that appear before any ``usemtl`` use the material named
``default``, which must then exist in the table.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InputError, MaterialError, MeshParseError, WatertightError
from .raycast import Bvh, batch_closest_hit

DEFAULT_BAND_EDGES = (0.0, 176.0, 775.0, 3408.0, 22050.0)

_IGNORED_KEYWORDS = {"o", "g", "s", "mtllib", "vn", "vt"}
_MIN_TRIANGLE_AREA = 1e-12


@dataclass(frozen=True)
class BandLayout:
    """Frequency band edges in Hz defining the absorption bands."""

    edges_hz: tuple[float, ...] = DEFAULT_BAND_EDGES

    def __post_init__(self) -> None:
        edges = tuple(float(e) for e in self.edges_hz)
        if len(edges) < 2:
            raise InputError("band layout needs at least two edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise InputError(f"band edges must be strictly increasing, got {edges}")
        object.__setattr__(self, "edges_hz", edges)

    @property
    def n_bands(self) -> int:
        return len(self.edges_hz) - 1


@dataclass(frozen=True)
class Material:
    """Named surface material with one absorption coefficient per band."""

    name: str
    absorption: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(a) for a in self.absorption)
        for a in coeffs:
            if not 0.0 <= a < 1.0:
                raise MaterialError(
                    f"material {self.name!r}: absorption {a} outside [0, 1); "
                    "a coefficient of exactly 1 would absorb everything on first contact"
                )
        object.__setattr__(self, "absorption", coeffs)


@dataclass(frozen=True)
class Triangle:
    v0: tuple[float, float, float]
    v1: tuple[float, float, float]
    v2: tuple[float, float, float]
    material_id: int


@dataclass(frozen=True)
class Hit:
    """Result of a closest-hit query.

    The normal is unit length and points toward the side the ray came
    from, so reflecting `direction` about it always bounces back into the
    half-space of the incoming ray.
    """

    t: float
    normal: tuple[float, float, float]
    material_id: int
    triangle_index: int


def parse_materials(text: str) -> tuple[BandLayout, list[Material]]:
    """Parse the JSON material table. Returns (band layout, materials)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MaterialError(f"material table is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "materials" not in doc:
        raise MaterialError('material table must be an object with a "materials" key')
    edges = doc.get("band_edges_hz", DEFAULT_BAND_EDGES)
    layout = BandLayout(tuple(edges))
    raw = doc["materials"]
    if not isinstance(raw, dict) or not raw:
        raise MaterialError('"materials" must be a non-empty name -> coefficients mapping')
    materials = []
    for name, coeffs in raw.items():
        if not isinstance(coeffs, (list, tuple)):
            raise MaterialError(f"material {name!r}: coefficients must be a list")
        if len(coeffs) != layout.n_bands:
            raise MaterialError(
                f"material {name!r}: expected {layout.n_bands} coefficients, got {len(coeffs)}"
            )
        materials.append(Material(name, tuple(coeffs)))
    return layout, materials


def _parse_face_index(token: str, n_vertices: int, line_no: int) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise MeshParseError(f"line {line_no}: bad face index {token!r}") from None
    if idx < 1 or idx > n_vertices:
        raise MeshParseError(
            f"line {line_no}: face index {idx} out of range (mesh has {n_vertices} vertices)"
        )
    return idx - 1


def parse_mesh(text: str) -> tuple[np.ndarray, list[tuple[int, int, int]], list[str]]:
    """Parse mesh text into vertices, faces, and per-face material names."""
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    face_materials: list[str] = []
    current = "default"
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        fields = rest.split()
        if keyword == "v":
            if len(fields) != 3:
                raise MeshParseError(f"line {line_no}: vertex needs exactly 3 coordinates")
            try:
                vertices.append((float(fields[0]), float(fields[1]), float(fields[2])))
            except ValueError:
                raise MeshParseError(f"line {line_no}: bad vertex coordinate") from None
        elif keyword == "f":
            if len(fields) != 3:
                raise MeshParseError(
                    f"line {line_no}: only triangular faces are supported ({len(fields)} indices)"
                )
            idx = tuple(_parse_face_index(tok, len(vertices), line_no) for tok in fields)
            faces.append(idx)
            face_materials.append(current)
        elif keyword == "usemtl":
            if not fields:
                raise MeshParseError(f"line {line_no}: usemtl needs a material name")
            current = fields[0]
        elif keyword in _IGNORED_KEYWORDS:
            continue
        else:
            raise MeshParseError(f"line {line_no}: unsupported directive {keyword!r}")
    if not faces:
        raise MeshParseError("mesh has no faces")
    return np.asarray(vertices, dtype=np.float64), faces, face_materials


class Scene:
    """Immutable triangle mesh with materials, bounds, and a BVH.

    Build scenes via :func:`load_scene`; the constructor is internal.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        faces: list[tuple[int, int, int]],
        material_ids: np.ndarray,
        materials: list[Material],
        bands: BandLayout,
        fingerprint: str = "",
    ) -> None:
        self._vertices = vertices
        self._vertices.setflags(write=False)
        self._faces = list(faces)
        self.materials = tuple(materials)
        self.bands = bands
        self.fingerprint = fingerprint

        tri = vertices[np.asarray(faces, dtype=np.intp)]
        self._v0 = np.ascontiguousarray(tri[:, 0, :])
        self._e1 = np.ascontiguousarray(tri[:, 1, :] - tri[:, 0, :])
        self._e2 = np.ascontiguousarray(tri[:, 2, :] - tri[:, 0, :])
        cross = np.cross(self._e1, self._e2)
        norms = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norms
        bad = np.flatnonzero(areas <= _MIN_TRIANGLE_AREA)
        if bad.size:
            raise MeshParseError(
                f"face {int(bad[0])} is degenerate (area {areas[bad[0]]:.3e} m^2)"
            )
        self._areas = areas
        self._unit_normals = cross / norms[:, None]
        self._material_ids = material_ids.astype(np.intp)
        self._alpha = np.asarray([m.absorption for m in materials], dtype=np.float64)
        self.bounds = (tri.reshape(-1, 3).min(axis=0), tri.reshape(-1, 3).max(axis=0))
        self.bvh = Bvh(self._v0, self._e1, self._e2)

    @property
    def n_triangles(self) -> int:
        return self._v0.shape[0]

    @property
    def triangles(self) -> list[Triangle]:
        v = self._vertices
        return [
            Triangle(tuple(v[a]), tuple(v[b]), tuple(v[c]), int(m))
            for (a, b, c), m in zip(self._faces, self._material_ids)
        ]

    def surface_area(self) -> float:
        return float(self._areas.sum())

    def mean_absorption(self) -> np.ndarray:
        """Area-weighted mean absorption per band."""
        weights = self._areas / self._areas.sum()
        return weights @ self._alpha[self._material_ids]

    def _hit_from_index(self, t: float, index: int, direction: np.ndarray) -> Hit:
        n = self._unit_normals[index]
        d = direction
        if d[0] * n[0] + d[1] * n[1] + d[2] * n[2] > 0.0:
            n = -n
        return Hit(float(t), (float(n[0]), float(n[1]), float(n[2])),
                   int(self._material_ids[index]), int(index))

    def intersect(self, origin, direction, t_min: float = 0.0) -> Hit | None:
        """Nearest triangle hit along a ray, via the BVH.

        `direction` must be unit length to 1e-9; `t` is then a distance in
        metres. Triangles are two-sided.
        """
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        norm = float(np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]))
        if abs(norm - 1.0) > 1e-9:
            raise InputError(f"direction must be unit length (|d| = {norm!r})")
        found = self.bvh.closest_hit(
            float(o[0]), float(o[1]), float(o[2]),
            float(d[0]), float(d[1]), float(d[2]), float(t_min),
        )
        if found is None:
            return None
        t, index = found
        return self._hit_from_index(t, index, d)

    def intersect_brute(self, origin, direction, t_min: float = 0.0) -> Hit | None:
        """Exhaustive all-triangle variant of :meth:`intersect` (oracle)."""
        o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
        d = np.asarray(direction, dtype=np.float64).reshape(1, 3)
        norm = float(np.linalg.norm(d))
        if abs(norm - 1.0) > 1e-9:
            raise InputError(f"direction must be unit length (|d| = {norm!r})")
        t, idx = batch_closest_hit(o, d, self._v0, self._e1, self._e2, float(t_min))
        if idx[0] < 0:
            return None
        return self._hit_from_index(float(t[0]), int(idx[0]), d[0])

    def batch_closest_hit(
        self, origins: np.ndarray, directions: np.ndarray, t_min: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized closest-hit used by the tracer. Same arithmetic as
        the scalar oracle; returns (t, triangle index or -1) per ray."""
        return batch_closest_hit(origins, directions, self._v0, self._e1, self._e2, t_min)


def load_scene(mesh_text: str, materials_text: str) -> Scene:
    """Build a :class:`Scene` from mesh text and a material table.

    Parameters
    ----------
    mesh_text : str
        Geometry in the OBJ subset documented at module level.
    materials_text : str
        JSON material table; every material name used by the mesh must
        resolve, and coefficient counts must match the band layout.

    Raises
    ------
    MeshParseError, MaterialError
        With a line number or the offending name.
    """
    vertices, faces, face_materials = parse_mesh(mesh_text)
    bands, materials = parse_materials(materials_text)
    ids = {m.name: i for i, m in enumerate(materials)}
    material_ids = np.empty(len(faces), dtype=np.intp)
    for i, name in enumerate(face_materials):
        if name not in ids:
            raise MaterialError(f"face {i} uses unknown material {name!r}")
        material_ids[i] = ids[name]
    digest = hashlib.sha256()
    digest.update(mesh_text.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(materials_text.encode("utf-8"))
    return Scene(vertices, faces, material_ids, materials, bands, digest.hexdigest())


def analytic_volume_and_area(scene: Scene) -> tuple[float, float]:
    """Exact enclosed volume and total surface area of a closed mesh.

    The volume is the magnitude of the signed tetrahedron sum, so it is
    positive for consistently inward- or outward-oriented meshes. Requires
    the mesh to be closed and consistently oriented: every directed edge
    must appear exactly once with each orientation. Raises
    :class:`WatertightError` listing boundary edges otherwise. Only this
    operation needs watertightness; tracing works on any mesh.
    """
    directed: Counter[tuple[int, int]] = Counter()
    for a, b, c in scene._faces:
        directed[(a, b)] += 1
        directed[(b, c)] += 1
        directed[(c, a)] += 1
    bad = sorted(
        edge for edge, count in directed.items()
        if count != 1 or directed.get((edge[1], edge[0]), 0) != 1
    )
    if bad:
        shown = ", ".join(f"{a}->{b}" for a, b in bad[:8])
        more = f" (+{len(bad) - 8} more)" if len(bad) > 8 else ""
        raise WatertightError(
            f"mesh is not closed/consistently oriented; offending edges: {shown}{more}"
        )
    v0, e1, e2 = scene._v0, scene._e1, scene._e2
    cross = np.cross(e1, e2)
    signed = float(np.sum(v0[:, 0] * cross[:, 0] + v0[:, 1] * cross[:, 1] + v0[:, 2] * cross[:, 2]))
    volume = abs(signed) / 6.0
    return volume, scene.surface_area()
