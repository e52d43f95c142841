"""Explicit mass-spring cloth on a regular particle grid.

Units are mm, g and s throughout, so forces are g*mm/s^2 and spring
constants g/s^2. The grid's x axis is the weft direction and its y axis the
warp direction. Gravity acts along -z.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import InvalidParams, InvalidSpec, NumericalBlowup, UnstableConfig
from .params import PhysicsParams

STRETCH, SHEAR, BEND = 0, 1, 2


@dataclass(frozen=True)
class ClothSpec:
    """Rectangular cloth. ``pinned`` holds flat particle indices (row-major,
    row = warp index, column = weft index)."""

    width: float = 200.0
    height: float = 200.0
    particle_spacing: float = 20.0
    pinned: tuple = ()
    origin: tuple = (0.0, 0.0, 0.0)
    orientation: str = "horizontal"  # rows advance along +y, or along -z for "vertical"

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, columns) of particles."""
        return (
            int(round(self.height / self.particle_spacing)) + 1,
            int(round(self.width / self.particle_spacing)) + 1,
        )

    def validate(self) -> None:
        s = self.particle_spacing
        if not s > 0:
            raise InvalidSpec("particle spacing must be positive")
        for name in ("width", "height"):
            v = getattr(self, name)
            if not v > 0:
                raise InvalidSpec(f"{name} must be positive")
            if abs(v / s - round(v / s)) > 1e-9:
                raise InvalidSpec(f"{name} {v} is not a multiple of spacing {s}")
        if self.orientation not in ("horizontal", "vertical"):
            raise InvalidSpec(f"unknown orientation {self.orientation!r}")
        n = self.shape[0] * self.shape[1]
        for p in self.pinned:
            if not 0 <= int(p) < n:
                raise InvalidSpec(f"pinned index {p} outside 0..{n - 1}")

    @classmethod
    def pinned_top_edge(cls, width=200.0, height=200.0, spacing=20.0, **kw) -> "ClothSpec":
        cols = int(round(width / spacing)) + 1
        return cls(width, height, spacing, tuple(range(cols)), **kw)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "particle_spacing": self.particle_spacing,
            "pinned": list(self.pinned),
            "origin": list(self.origin),
            "orientation": self.orientation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClothSpec":
        d = dict(d)
        if d.get("pinned") == "top_edge":
            cols = int(round(d.get("width", 200.0) / d.get("particle_spacing", 20.0))) + 1
            d["pinned"] = list(range(cols))
        return cls(
            float(d.get("width", 200.0)),
            float(d.get("height", 200.0)),
            float(d.get("particle_spacing", 20.0)),
            tuple(int(p) for p in d.get("pinned", ())),
            tuple(float(x) for x in d.get("origin", (0.0, 0.0, 0.0))),
            d.get("orientation", "horizontal"),
        )


@dataclass(frozen=True)
class SimConfig:
    frame_dt: float = 0.042
    substeps: int | None = None  # None picks the smallest stable count
    gravity: float = 9800.0  # mm/s^2, acting along -z
    air_damping: float = 1.0  # g/s, force = -air_damping * velocity
    ground: float | None = None  # z of an optional collision plane

    def to_dict(self) -> dict:
        return {
            "frame_dt": self.frame_dt,
            "substeps": self.substeps,
            "gravity": self.gravity,
            "air_damping": self.air_damping,
            "ground": self.ground,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class Elements:
    """Springs. Beyond compression to ``compress_len`` the tangent stiffness
    switches from ``k`` to ``k_compress`` (force stays continuous)."""

    i: np.ndarray
    j: np.ndarray
    rest: np.ndarray
    k: np.ndarray
    k_compress: np.ndarray
    compress_len: np.ndarray
    kind: np.ndarray

    def __len__(self):
        return len(self.i)

    def count(self, kind: int) -> int:
        return int(np.sum(self.kind == kind))


@dataclass
class SimState:
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    elements: Elements
    pinned: np.ndarray  # bool mask
    anchors: np.ndarray  # positions held by pinned particles
    internal_damping: float = 0.0
    friction: float = 0.0
    time: float = 0.0
    step_count: int = 0
    faces: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    _incidence: object = field(default=None, repr=False)

    def copy(self) -> "SimState":
        return replace(
            self,
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
        )

    @property
    def incidence(self):
        if self._incidence is None:
            e = self.elements
            n, m = len(self.masses), len(e)
            rows = np.concatenate([e.i, e.j])
            cols = np.concatenate([np.arange(m), np.arange(m)])
            data = np.concatenate([np.ones(m), -np.ones(m)])
            self._incidence = sparse.csr_matrix((data, (rows, cols)), shape=(n, m))
        return self._incidence


@dataclass
class Trajectory:
    times: list
    positions: list
    faces: np.ndarray

    def __len__(self):
        return len(self.times)


def grid_faces(rows: int, cols: int) -> np.ndarray:
    """Triangles from splitting each grid quad along its (r, c)-(r+1, c+1) diagonal."""
    faces = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            a, b = r * cols + c, r * cols + c + 1
            d, e = (r + 1) * cols + c, (r + 1) * cols + c + 1
            faces.append((a, b, e))
            faces.append((a, e, d))
    return np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def build_cloth(spec: ClothSpec, params: PhysicsParams) -> SimState:
    """Particles, masses and spring tables for ``spec`` with ``params``.

    Stretch edges join axis neighbours, shear springs both diagonals (left
    diagonal down-right, right diagonal down-left) and bend springs second
    neighbours along each axis.
    """
    spec.validate()
    if not isinstance(params, PhysicsParams):
        raise InvalidParams("params must be a PhysicsParams instance")
    rows, cols = spec.shape
    s = spec.particle_spacing
    r_idx, c_idx = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    r_idx, c_idx = r_idx.ravel(), c_idx.ravel()
    ox, oy, oz = spec.origin
    if spec.orientation == "horizontal":
        pos = np.column_stack([ox + c_idx * s, oy + r_idx * s, np.full(r_idx.shape, oz)])
    else:
        pos = np.column_stack([ox + c_idx * s, np.full(r_idx.shape, oy), oz - r_idx * s])
    pos = pos.astype(float)

    cell_mass = params.density * (s / 1000.0) ** 2  # g/m^2 * m^2
    wx = np.where((c_idx == 0) | (c_idx == cols - 1), 0.5, 1.0)
    wy = np.where((r_idx == 0) | (r_idx == rows - 1), 0.5, 1.0)
    masses = cell_mass * wx * wy

    def idx(r, c):
        return r * cols + c

    bs, br, bk = params.bending_stiffness, params.buckling_ratio, params.buckling_stiffness
    stretch_warp, stretch_weft = params.stretch_stiffness
    shear_l, shear_r = params.shear_stiffness
    tables = {k: [] for k in ("i", "j", "rest", "k", "kc", "lc", "kind")}

    def add(a, b, rest, k, kc=None, lc=0.0, kind=STRETCH):
        tables["i"].append(a)
        tables["j"].append(b)
        tables["rest"].append(rest)
        tables["k"].append(k)
        tables["kc"].append(k if kc is None else kc)
        tables["lc"].append(lc)
        tables["kind"].append(kind)

    # per-edge constant = stiffness * perpendicular spacing / rest length
    edge_scale = s / s
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:  # weft
                add(idx(r, c), idx(r, c + 1), s, stretch_weft * edge_scale)
            if r + 1 < rows:  # warp
                add(idx(r, c), idx(r + 1, c), s, stretch_warp * edge_scale)
    diag = s * math.sqrt(2.0)
    for r in range(rows - 1):
        for c in range(cols - 1):
            add(idx(r, c), idx(r + 1, c + 1), diag, shear_l, kind=SHEAR)
            add(idx(r, c + 1), idx(r + 1, c), diag, shear_r, kind=SHEAR)
    # index 2 = warp, 3 = weft in the four-direction tuples
    for r in range(rows):
        for c in range(cols):
            if c + 2 < cols:
                add(idx(r, c), idx(r, c + 2), 2 * s, bs[3] / s**2, bk[3] / s**2, br[3] / 100.0 * 2 * s, BEND)
            if r + 2 < rows:
                add(idx(r, c), idx(r + 2, c), 2 * s, bs[2] / s**2, bk[2] / s**2, br[2] / 100.0 * 2 * s, BEND)

    elements = Elements(
        np.asarray(tables["i"], dtype=np.int64),
        np.asarray(tables["j"], dtype=np.int64),
        np.asarray(tables["rest"], dtype=float),
        np.asarray(tables["k"], dtype=float),
        np.asarray(tables["kc"], dtype=float),
        np.asarray(tables["lc"], dtype=float),
        np.asarray(tables["kind"], dtype=np.int8),
    )
    pinned = np.zeros(len(masses), dtype=bool)
    pinned[list(spec.pinned)] = True
    return SimState(
        positions=pos,
        velocities=np.zeros_like(pos),
        masses=masses,
        elements=elements,
        pinned=pinned,
        anchors=pos.copy(),
        internal_damping=params.internal_damping,
        friction=params.friction,
        faces=grid_faces(rows, cols),
    )


def max_stable_dt(state: SimState, config: SimConfig) -> float:
    """Largest substep passing the stability check.

    Springs: dt <= 0.5 * sqrt(m_min / k_max). Damping adds
    dt <= m_min / (air + internal * max element degree).
    """
    e = state.elements
    free = ~state.pinned
    m_min = float(state.masses[free].min()) if free.any() else float(state.masses.min())
    k_max = float(max(e.k.max(initial=0.0), e.k_compress.max(initial=0.0)))
    dt = math.inf if k_max <= 0 else 0.5 * math.sqrt(m_min / k_max)
    degree = np.bincount(np.concatenate([e.i, e.j]), minlength=len(state.masses)).max(initial=0)
    c_sum = config.air_damping + state.internal_damping * degree
    if c_sum > 0:
        dt = min(dt, m_min / c_sum)
    return dt


def resolve_substeps(state: SimState, config: SimConfig) -> int:
    if not config.frame_dt > 0:
        raise UnstableConfig("frame_dt must be positive")
    limit = max_stable_dt(state, config)
    if config.substeps is None:
        return max(1, math.ceil(config.frame_dt / limit * (1 - 1e-12)))
    if config.substeps < 1:
        raise UnstableConfig("substeps must be >= 1")
    if config.frame_dt / config.substeps > limit:
        raise UnstableConfig(
            f"dt {config.frame_dt / config.substeps:.3g} s exceeds stable limit {limit:.3g} s;"
            f" use at least {math.ceil(config.frame_dt / limit)} substeps"
        )
    return config.substeps


def spring_forces(state: SimState, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    e = state.elements
    if len(e) == 0:
        return np.zeros_like(x)
    d = x[e.j] - x[e.i]
    length = np.sqrt(np.einsum("ij,ij->i", d, d))
    u = d / length[:, None]
    compressed = length < e.compress_len
    mag = np.where(
        compressed,
        e.k * (e.compress_len - e.rest) + e.k_compress * (length - e.compress_len),
        e.k * (length - e.rest),
    )
    if state.internal_damping:
        mag = mag + state.internal_damping * np.einsum("ij,ij->i", v[e.j] - v[e.i], u)
    return state.incidence @ (mag[:, None] * u)


def _substep(state: SimState, config: SimConfig, dt: float) -> None:
    x, v, m = state.positions, state.velocities, state.masses
    force = spring_forces(state, x, v)
    force[:, 2] -= config.gravity * m
    if config.air_damping:
        force -= config.air_damping * v
    v += dt * force / m[:, None]
    v[state.pinned] = 0.0
    x += dt * v
    x[state.pinned] = state.anchors[state.pinned]
    if config.ground is not None:
        below = x[:, 2] < config.ground
        if below.any():
            x[below, 2] = config.ground
            vn = v[below, 2]
            impulse = np.maximum(-vn, 0.0)
            v[below, 2] = np.maximum(vn, 0.0)
            vt = v[below, :2]
            speed = np.linalg.norm(vt, axis=1)
            keep = np.where(speed > 0, np.maximum(0.0, 1 - state.friction * impulse / np.where(speed > 0, speed, 1)), 0)
            v[below, :2] = vt * keep[:, None]
    state.step_count += 1
    state.time += dt
    if not np.isfinite(x).all():
        raise NumericalBlowup(state.step_count)


def step(state: SimState, config: SimConfig, params: PhysicsParams | None = None) -> SimState:
    """Advance one frame (``frame_dt``) with semi-implicit Euler substeps.

    Returns a new state; ``params`` optionally overrides the friction and
    internal damping the state was built with.
    """
    new = state.copy()
    if params is not None:
        new.friction, new.internal_damping = params.friction, params.internal_damping
    n = resolve_substeps(new, config)
    dt = config.frame_dt / n
    for _ in range(n):
        _substep(new, config, dt)
    return new


def simulate(spec: ClothSpec, params: PhysicsParams, config: SimConfig | None = None, duration: float = 3.0) -> Trajectory:
    """Snapshots at every frame boundary from t=0 to ``duration``."""
    config = config or SimConfig()
    if duration < 0:
        raise InvalidSpec("duration must be >= 0")
    state = build_cloth(spec, params)
    n_frames = int(round(duration / config.frame_dt))
    n_sub = resolve_substeps(state, config)
    dt = config.frame_dt / n_sub
    times, frames = [0.0], [state.positions.copy()]
    for f in range(1, n_frames + 1):
        for _ in range(n_sub):
            _substep(state, config, dt)
        times.append(f * config.frame_dt)
        frames.append(state.positions.copy())
    return Trajectory(times, frames, state.faces.copy())


def energy(state: SimState, config: SimConfig) -> float:
    """Kinetic + spring potential + gravitational energy (g*mm^2/s^2)."""
    x, v, m = state.positions, state.velocities, state.masses
    kinetic = 0.5 * float(np.sum(m * np.einsum("ij,ij->i", v, v)))
    e = state.elements
    length = np.linalg.norm(x[e.j] - x[e.i], axis=1)
    lc = e.compress_len
    normal = 0.5 * e.k * (length - e.rest) ** 2
    knee = 0.5 * e.k * (lc - e.rest) ** 2
    beyond = knee + e.k * (lc - e.rest) * (length - lc) + 0.5 * e.k_compress * (length - lc) ** 2
    potential = float(np.sum(np.where(length < lc, beyond, normal)))
    gravity = float(np.sum(m * config.gravity * x[:, 2]))
    return kinetic + potential + gravity


# ---------------------------------------------------------------- export


def export_trajectory(traj: Trajectory, path, format: str = "obj-sequence") -> list[Path]:
    """Write ``traj`` as one OBJ per frame (into directory ``path``) or one JSON file."""
    if len(traj) == 0:
        raise ValueError("cannot export an empty trajectory")
    path = Path(path)
    faces = np.asarray(traj.faces, dtype=np.int64)
    if format == "obj-sequence":
        path.mkdir(parents=True, exist_ok=True)
        face_block = "".join(f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in faces)
        written = []
        for f, (t, pos) in enumerate(zip(traj.times, traj.positions)):
            out = path / f"frame_{f:05d}.obj"
            verts = "".join(f"v {x!r} {y!r} {z!r}\n" for x, y, z in np.asarray(pos).tolist())
            out.write_text(f"# tagphys frame {f} t={t!r}\n" + verts + face_block, encoding="utf-8")
            written.append(out)
        return written
    if format == "json":
        doc = {
            "times": list(traj.times),
            "faces": faces.tolist(),
            "frames": [np.asarray(p).tolist() for p in traj.positions],
            "units": "mm",
        }
        path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
        return [path]
    raise ValueError(f"unknown export format {format!r}")


def read_obj(path) -> tuple[np.ndarray, np.ndarray, float | None]:
    """(vertices, triangle faces, time) from an OBJ file; polygons are fanned."""
    verts, faces, t = [], [], None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("v "):
            verts.append([float(x) for x in line.split()[1:4]])
        elif line.startswith("f "):
            idx = [int(tok.split("/")[0]) - 1 for tok in line.split()[1:]]
            for a, b in zip(idx[1:-1], idx[2:]):
                faces.append((idx[0], a, b))
        elif line.startswith("#") and "t=" in line:
            t = float(line.rsplit("t=", 1)[1])
    return np.asarray(verts, dtype=float).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3), t


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.obj"))
        if not files:
            raise ValueError(f"no OBJ files in {path}")
        times, frames, faces = [], [], None
        for i, fpath in enumerate(files):
            v, f, t = read_obj(fpath)
            times.append(t if t is not None else float(i))
            frames.append(v)
            faces = f if faces is None else faces
        return Trajectory(times, frames, faces)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return Trajectory(
        list(doc["times"]),
        [np.asarray(p, dtype=float) for p in doc["frames"]],
        np.asarray(doc["faces"], dtype=np.int64).reshape(-1, 3),
    )
