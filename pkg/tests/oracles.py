"""Naive reference implementations used to cross-check the library."""
import itertools
import math


def material_ref(gt, pred):
    accs, f1s = [], []
    for g, p in zip(gt, pred):
        g, p = list(dict.fromkeys(g)), list(dict.fromkeys(p))
        tp = sum(1 for x in p if x in g)
        fp = sum(1 for x in p if x not in g)
        fn = sum(1 for x in g if x not in p)
        accs.append(tp / (tp + fp + fn) if (tp + fp + fn) else 1.0)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec))
    return sum(accs) / len(accs), sum(f1s) / len(f1s)


def percentage_ref(gt, pred):
    maes, nmaes = [], []
    for g, p in zip(gt, pred):
        keys = sorted(set(g) | set(p))
        d = [abs(g.get(k, 0.0) - p.get(k, 0.0)) for k in keys]
        n = []
        for k, dk in zip(keys, d):
            m = max(g.get(k, 0.0), p.get(k, 0.0))
            n.append(dk / m if m > 0 else 0.0)
        maes.append(sum(d) / len(d))
        nmaes.append(sum(n) / len(n))
    return sum(maes) / len(maes), sum(nmaes) / len(nmaes)


def categorical_ref(gt, pred):
    acc = sum(1 for a, b in zip(gt, pred) if a == b) / len(gt)
    f1s = []
    for c in set(gt) | set(pred):
        tp = fp = fn = 0
        for a, b in zip(gt, pred):
            if a == c and b == c:
                tp += 1
            elif b == c:
                fp += 1
            elif a == c:
                fn += 1
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec))
    return acc, sum(f1s) / len(f1s)


def continuous_ref(gt, pred):
    mae = sum(abs(a - b) for a, b in zip(gt, pred)) / len(gt)
    span = max(gt) - min(gt)
    return mae, (mae / span if span > 0 else None)


def chamfer_ref(a, b):
    da = sum(min(math.dist(p, q) for q in b) for p in a) / len(a)
    db = sum(min(math.dist(q, p) for p in a) for q in b) / len(b)
    return 0.5 * (da + db)


def _clip(poly, axis, value, keep_above):
    """Sutherland-Hodgman step against one closed half-space."""
    def inside(p):
        return p[axis] >= value if keep_above else p[axis] <= value

    out = []
    for cur, nxt in zip(poly, poly[1:] + poly[:1]):
        if inside(cur):
            out.append(cur)
            if not inside(nxt):
                t = (value - cur[axis]) / (nxt[axis] - cur[axis])
                out.append(tuple(c + t * (n - c) for c, n in zip(cur, nxt)))
        elif inside(nxt):
            t = (value - cur[axis]) / (nxt[axis] - cur[axis])
            out.append(tuple(c + t * (n - c) for c, n in zip(cur, nxt)))
    return out


def triangle_touches_box(tri, lo, hi):
    poly = [tuple(map(float, v)) for v in tri]
    for axis in range(3):
        poly = _clip(poly, axis, lo[axis], True)
        if not poly:
            return False
        poly = _clip(poly, axis, hi[axis], False)
        if not poly:
            return False
    return True


def dense_voxels(mesh, origin, shape, h):
    verts, faces = mesh
    occ = set()
    for idx in itertools.product(*(range(int(s)) for s in shape)):
        lo = [origin[k] + idx[k] * h for k in range(3)]
        hi = [lo[k] + h for k in range(3)]
        if any(triangle_touches_box([verts[i] for i in f], lo, hi) for f in faces):
            occ.add(idx)
    return occ


def voxel_iou_ref(a, b, h):
    pts = [tuple(v) for v in a[0]] + [tuple(v) for v in b[0]]
    origin = [min(p[k] for p in pts) for k in range(3)]
    shape = [math.floor((max(p[k] for p in pts) - origin[k]) / h) + 1 for k in range(3)]
    oa, ob = dense_voxels(a, origin, shape, h), dense_voxels(b, origin, shape, h)
    return len(oa & ob) / len(oa | ob)
