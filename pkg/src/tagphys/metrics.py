"""Evaluation metrics for attributes, scalars, geometry and the token loss."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EmptyCloud,
    EmptyMesh,
    LengthMismatch,
    UnknownLabel,
    ZeroCount,
    ZeroProbability,
    ZeroRange,
)

CHAMFER_REPORT_SCALE = 1e4
DEFAULT_VOXEL_MM = 50.0


def _fiber_set(x) -> frozenset:
    if hasattr(x, "fibers"):
        return frozenset(x.fibers)
    if isinstance(x, Mapping):
        return frozenset(x)
    return frozenset(x)


def _pct_map(x) -> dict:
    if hasattr(x, "as_dict"):
        return x.as_dict()
    return dict(x)


def _same_length(gt, pred):
    if len(gt) != len(pred):
        raise LengthMismatch(f"{len(gt)} ground-truth vs {len(pred)} predicted items")
    if len(gt) == 0:
        raise LengthMismatch("need at least one example")


@dataclass
class MaterialSetScore:
    accuracy: float
    f1: float
    per_example: list  # (tp, fp, fn)


def material_set_score(gt: Sequence, pred: Sequence) -> MaterialSetScore:
    """Per-example fiber-set accuracy tp/(tp+fp+fn) and F1, averaged.

    Percentages are ignored; examples with no true positive score F1 = 0.
    """
    _same_length(gt, pred)
    counts, acc, f1 = [], [], []
    for g, p in zip(gt, pred):
        g, p = _fiber_set(g), _fiber_set(p)
        tp, fp, fn = len(g & p), len(p - g), len(g - p)
        counts.append((tp, fp, fn))
        acc.append(tp / (tp + fp + fn) if tp + fp + fn else 1.0)
        if tp == 0:
            f1.append(0.0)
        else:
            precision, recall = tp / (tp + fp), tp / (tp + fn)
            f1.append(2 * precision * recall / (precision + recall))
    return MaterialSetScore(float(np.mean(acc)), float(np.mean(f1)), counts)


@dataclass
class PercentageErrorScore:
    mae: float
    nmae: float


def percentage_error(gt: Sequence, pred: Sequence) -> PercentageErrorScore:
    """Percentage MAE/NMAE over the union of fibers of each example.

    A fiber missing from one side counts as 0%. NMAE divides each term by
    max(gt, pred) for that fiber.
    """
    _same_length(gt, pred)
    maes, nmaes = [], []
    for g, p in zip(gt, pred):
        g, p = _pct_map(g), _pct_map(p)
        union = set(g) | set(p)
        diffs = np.array([abs(g.get(m, 0.0) - p.get(m, 0.0)) for m in union], dtype=float)
        peaks = np.array([max(g.get(m, 0.0), p.get(m, 0.0)) for m in union], dtype=float)
        maes.append(diffs.mean())
        nmaes.append(np.mean(np.divide(diffs, peaks, out=np.zeros_like(diffs), where=peaks > 0)))
    return PercentageErrorScore(float(np.mean(maes)), float(np.mean(nmaes)))


def categorical_scores(gt: Sequence, pred: Sequence, classes: Sequence) -> tuple[float, float]:
    """(accuracy, macro-F1); macro-F1 averages classes seen in gt or pred."""
    _same_length(gt, pred)
    known = set(classes)
    for label in list(gt) + list(pred):
        if label not in known:
            raise UnknownLabel(f"label {label!r} not among classes")
    accuracy = sum(g == p for g, p in zip(gt, pred)) / len(gt)
    f1s = []
    for c in sorted(set(gt) | set(pred), key=str):
        tp = sum(g == c and p == c for g, p in zip(gt, pred))
        fp = sum(g != c and p == c for g, p in zip(gt, pred))
        fn = sum(g == c and p != c for g, p in zip(gt, pred))
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return float(accuracy), float(np.mean(f1s))


def continuous_error(gt: Sequence[float], pred: Sequence[float], strict: bool = False) -> tuple[float, float | None]:
    """(MAE, MAE / (max gt - min gt)).

    A constant ground truth leaves NMAE undefined: it comes back as None, or
    raises ZeroRange when ``strict``.
    """
    _same_length(gt, pred)
    g = np.asarray(gt, dtype=float)
    p = np.asarray(pred, dtype=float)
    mae = float(np.mean(np.abs(g - p)))
    span = float(g.max() - g.min())
    if span <= 0:
        if strict:
            raise ZeroRange("ground truth has zero range; NMAE undefined")
        return mae, None
    return mae, mae / span


def chamfer(a, b) -> float:
    """Symmetric Chamfer distance: mean of the two directed mean
    nearest-neighbour Euclidean distances (not squared)."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("chamfer needs two non-empty point sets")
    d_ab, _ = cKDTree(b).query(a, k=1)
    d_ba, _ = cKDTree(a).query(b, k=1)
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


# ---------------------------------------------------------------- voxel IoU


def _as_mesh(mesh):
    verts, faces = mesh
    verts = np.asarray(verts, dtype=float).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(verts) == 0 or len(faces) == 0:
        raise EmptyMesh("mesh needs vertices and triangle faces")
    return verts, faces


def _tri_box_overlap(tri, centers, half):
    """Separating-axis test of one triangle against many axis-aligned boxes.

    Touching counts as overlap. ``tri`` is (3, 3), ``centers`` is (m, 3).
    """
    v = tri[None, :, :] - centers[:, None, :]  # (m, 3, 3)
    hit = np.ones(len(centers), dtype=bool)
    # box face normals
    hit &= (v.min(axis=1) <= half).all(axis=1) & (v.max(axis=1) >= -half).all(axis=1)
    edges = (tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2])
    normal = np.cross(edges[0], edges[1])
    axes = [normal] + [np.cross(np.eye(3)[i], e) for i in range(3) for e in edges]
    for axis in axes:
        if not np.any(axis):
            continue
        p = v @ axis  # (m, 3)
        r = half * np.abs(axis).sum()
        hit &= (p.min(axis=1) <= r) & (p.max(axis=1) >= -r)
    return hit


def voxelize_surface(mesh, voxel: float, origin, shape) -> set:
    """Voxels of a grid (``origin`` min corner, ``shape`` cells) touched by
    any triangle."""
    verts, faces = _as_mesh(mesh)
    origin = np.asarray(origin, dtype=float)
    shape = np.asarray(shape)
    half = voxel / 2.0
    occupied = set()
    for tri in verts[faces]:
        lo = np.maximum(np.ceil((tri.min(axis=0) - origin) / voxel).astype(int) - 1, 0)
        hi = np.minimum(np.floor((tri.max(axis=0) - origin) / voxel).astype(int), shape - 1)
        if np.any(hi < lo):
            continue
        grid = np.stack(
            np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij"), axis=-1
        ).reshape(-1, 3)
        centers = origin + (grid + 0.5) * voxel
        for idx in grid[_tri_box_overlap(tri, centers, half)]:
            occupied.add(tuple(int(i) for i in idx))
    return occupied


def joint_grid(meshes, voxel: float):
    """(origin, shape) of the grid anchored at the joint bounding-box min corner."""
    pts = np.vstack([_as_mesh(m)[0] for m in meshes])
    origin = pts.min(axis=0)
    shape = np.floor((pts.max(axis=0) - origin) / voxel).astype(int) + 1
    return origin, shape


def voxel_iou(a, b, voxel: float = DEFAULT_VOXEL_MM) -> float:
    """IoU of the surface-voxel occupancy of two triangle meshes.

    Meshes are ``(vertices, faces)`` pairs in a shared frame; ``voxel`` is
    the cube edge in the meshes' length unit (50 mm by default).
    """
    if voxel <= 0:
        raise ValueError("voxel edge must be positive")
    origin, shape = joint_grid([a, b], voxel)
    occ_a = voxelize_surface(a, voxel, origin, shape)
    occ_b = voxelize_surface(b, voxel, origin, shape)
    union = occ_a | occ_b
    if not union:
        raise EmptyMesh("no occupied voxels")
    return len(occ_a & occ_b) / len(union)


# ---------------------------------------------------------------- token loss


def weighted_cross_entropy(token_probs, targets, weights) -> float:
    """-sum_i w[t_i] * log p_i for the probabilities of the target tokens.

    ``weights`` is indexed by token class (mapping or sequence).
    """
    probs = np.asarray(token_probs, dtype=float)
    if len(probs) != len(targets):
        raise LengthMismatch("token_probs and targets differ in length")
    if np.any(probs <= 0):
        raise ZeroProbability("log of a non-positive probability")
    if np.any(probs > 1):
        raise ValueError("probabilities must not exceed 1")
    w = np.array([weights[t] for t in targets], dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    return float(-(w * np.log(probs)).sum())


def inverse_frequency_weights(class_counts: Mapping) -> dict:
    """weight_c = total / (n_classes * count_c)."""
    if not class_counts:
        raise ZeroCount("no classes")
    for c, n in class_counts.items():
        if n < 1:
            raise ZeroCount(f"class {c!r} has count {n}")
    total = sum(class_counts.values())
    k = len(class_counts)
    return {c: total / (k * n) for c, n in class_counts.items()}


# ---------------------------------------------------------------- sequences


def geometry_sequence_scores(frames_a, frames_b, voxel: float = DEFAULT_VOXEL_MM) -> dict:
    """Per-frame and mean Chamfer (raw and x1e4) and voxel IoU for two mesh sequences."""
    if len(frames_a) != len(frames_b):
        raise LengthMismatch(f"{len(frames_a)} vs {len(frames_b)} frames")
    if not frames_a:
        raise EmptyMesh("empty sequence")
    cds, ious = [], []
    for ma, mb in zip(frames_a, frames_b):
        cds.append(chamfer(ma[0], mb[0]))
        ious.append(voxel_iou(ma, mb, voxel))
    return {
        "per_frame": [
            {"frame": i, "chamfer": c, "chamfer_x1e4": c * CHAMFER_REPORT_SCALE, "iou": u}
            for i, (c, u) in enumerate(zip(cds, ious))
        ],
        "mean": {
            "chamfer": float(np.mean(cds)),
            "chamfer_x1e4": float(np.mean(cds)) * CHAMFER_REPORT_SCALE,
            "iou": float(np.mean(ious)),
        },
        "voxel": voxel,
    }
