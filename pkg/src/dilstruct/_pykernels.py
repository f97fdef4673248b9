"""Pure-python fallback for the hot kernels.

Same call signatures as the compiled extension ``dilstruct._ckernels``:
graded nilpotent group arithmetic (truncated BCH, steps 1..3) and the
branch-and-bound search over metric-space correspondences.
"""
import numpy as np

BACKEND = "python"


def carnot_mul(a, b, bracket, step):
    """Group product in exponential coordinates of the first kind.

    ``bracket`` is the dense antisymmetric structure tensor, indexed
    [i, j, k] for the e_k component of [e_i, e_j].  Valid for nilpotency
    step <= 3, where the BCH series terminates at the double brackets.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = a + b
    if step >= 2:
        ab = np.einsum("ijk,i,j->k", bracket, a, b)
        out = out + 0.5 * ab
        if step >= 3:
            a_ab = np.einsum("ijk,i,j->k", bracket, a, ab)
            b_ab = np.einsum("ijk,i,j->k", bracket, b, ab)
            out = out + (a_ab - b_ab) / 12.0
    return out


def carnot_dil(eps, a, deg):
    """Graded dilation: coordinate i scales by eps**deg[i]."""
    return np.asarray(a, dtype=float) * (float(eps) ** np.asarray(deg))


def heis_mul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.array(
        [
            a[0] + b[0],
            a[1] + b[1],
            a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0]),
        ]
    )


def heis_inv(a):
    return -np.asarray(a, dtype=float)


def heis_dil(eps, a):
    eps = float(eps)
    a = np.asarray(a, dtype=float)
    return np.array([eps * a[0], eps * a[1], eps * eps * a[2]])


def heis_gauge(a):
    """Cygan-Koranyi gauge ((x^2+y^2)^2 + 16 z^2)^(1/4); d(g,h)=gauge(inv(g)*h) is a metric."""
    a = np.asarray(a, dtype=float)
    sq = a[0] * a[0] + a[1] * a[1]
    return (sq * sq + 16.0 * a[2] * a[2]) ** 0.25


def gh_search(dx, dy, best0, forced_i=-1, forced_j=-1):
    """Minimum accuracy over correspondences between two finite spaces.

    A correspondence assigns every x a nonempty subset of Y such that the
    union covers Y.  Depth-first over rows with bitmask subsets, pruning
    on the running accuracy (max pairwise distortion) against the best
    complete assignment found so far.  ``best0`` seeds the bound (pass
    inf when no upper bound is known).  When ``forced_i/j >= 0`` the pair
    (forced_i, forced_j) is required to belong to the correspondence.

    Returns (value, masks) where masks[i] is the Y-bitmask of row i.
    """
    n = dx.shape[0]
    m = dy.shape[0]
    full = (1 << m) - 1
    if n * m > 30 or m >= 31:
        raise ValueError("instance too large for exact search")
    subsets = []
    for i in range(n):
        row = []
        for mask in range(1, full + 1):
            if i == forced_i and not (mask >> forced_j) & 1:
                continue
            row.append(mask)
        # small low-spread subsets first; same order as the compiled kernel
        row.sort(key=lambda mk: (_popcount(mk), _mask_diam(mk, dy)))
        subsets.append(row)

    best = [float(best0), None]
    masks = np.zeros(n, dtype=np.int64)

    def rec(i, covered, acc):
        if acc >= best[0]:
            return
        if i == n:
            if covered == full:
                best[0] = acc
                best[1] = masks.copy()
            return
        # remaining rows must be able to cover the missing columns
        for mask in subsets[i]:
            new_acc = acc
            for j in range(m):
                if not (mask >> j) & 1:
                    continue
                for i2 in range(i + 1):
                    m2 = mask if i2 == i else masks[i2]
                    for j2 in range(m):
                        if not (m2 >> j2) & 1:
                            continue
                        v = abs(dy[j, j2] - dx[i, i2])
                        if v > new_acc:
                            new_acc = v
            if new_acc >= best[0]:
                continue
            masks[i] = mask
            rec(i + 1, covered | mask, new_acc)
        masks[i] = 0

    rec(0, 0, 0.0)
    return best[0], best[1]


def _popcount(x):
    return bin(x).count("1")


def _mask_diam(mask, dy):
    c = 0.0
    js = [j for j in range(len(dy)) if (mask >> j) & 1]
    for a in js:
        for b in js:
            c = max(c, abs(dy[a][b]))
    return c
