"""Relation-based Gromov-Hausdorff calculus on finite metric spaces.

Distortion statistics of relations (accuracy, resolution, precision),
cartographic generalization, and the GH distance as the minimum accuracy
over correspondences.  Convention note: the distance here is the plain
infimum of accuracies, with no 1/2 factor, i.e. exactly twice the more
common textbook normalization.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from dilstruct import kernels
from dilstruct.metric import FiniteMetricSpace, MalformedInputError

DEFAULT_CAP = 12


class EmptyRelationError(ValueError):
    pass


class DensityError(ValueError):
    def __init__(self, side: str, witness: str, radius: float):
        self.side = side
        self.witness = witness
        self.radius = radius
        super().__init__(f"{side} is not {radius}-dense: point {witness!r} uncovered")


class CapExceededError(ValueError):
    def __init__(self, size: int, cap: int):
        super().__init__(
            f"|src|*|dst| = {size} exceeds the exact-search cap {cap}; use gh_upper_bound"
        )


@dataclass
class Relation:
    src: FiniteMetricSpace
    dst: FiniteMetricSpace
    pairs: set

    def __post_init__(self):
        self.pairs = {(str(a), str(b)) for a, b in self.pairs}
        if not self.pairs:
            raise EmptyRelationError("relation must be nonempty")
        for a, b in self.pairs:
            self.src.index(a)
            self.dst.index(b)

    @property
    def dom(self) -> set:
        return {a for a, _ in self.pairs}

    @property
    def im(self) -> set:
        return {b for _, b in self.pairs}

    def is_correspondence(self) -> bool:
        return self.dom == set(self.src.ids) and self.im == set(self.dst.ids)

    def transpose(self) -> "Relation":
        return Relation(src=self.dst, dst=self.src, pairs={(b, a) for a, b in self.pairs})

    def to_json(self) -> str:
        return json.dumps(sorted(self.pairs))

    @classmethod
    def from_json(cls, text: str, src: FiniteMetricSpace, dst: FiniteMetricSpace) -> "Relation":
        return cls(src=src, dst=dst, pairs={tuple(p) for p in json.loads(text)})


@dataclass
class RelationStats:
    accuracy: float
    resolution: float
    precision: float


@dataclass
class GHResult:
    value: float
    witness: Relation
    kind: str  # "exact" | "upper-bound"

    def to_json(self) -> str:
        return json.dumps(
            {"value": self.value, "kind": self.kind, "witness": sorted(self.witness.pairs)},
            sort_keys=True,
        )


def relation_stats(rel: Relation) -> RelationStats:
    """Exact accuracy / resolution / precision by full pair enumeration."""
    d = rel.src.dmat
    D = rel.dst.dmat
    idx = [(rel.src.index(a), rel.dst.index(b)) for a, b in sorted(rel.pairs)]
    acc = 0.0
    res = 0.0
    prec = 0.0
    for i1, j1 in idx:
        for i2, j2 in idx:
            acc = max(acc, abs(D[j1, j2] - d[i1, i2]))
            if j1 == j2:
                res = max(res, d[i1, i2])
            if i1 == i2:
                prec = max(prec, D[j1, j2])
    return RelationStats(accuracy=acc, resolution=res, precision=prec)


def _check_dense(space: FiniteMetricSpace, subset: set, radius: float, side: str):
    # closed balls, with one-ulp slack so exact-radius witnesses survive
    # floating-point distance computation
    slack = radius + 1e-12 * (1.0 + radius)
    for pid in space.ids:
        i = space.index(pid)
        if all(space.dmat[i, space.index(q)] > slack for q in subset):
            raise DensityError(side, pid, radius)


def bar_generalize(rel: Relation, eps: float, mu: float) -> Relation:
    """Enlarge a relation by closed balls of radius eps (src) and mu (dst).

    Requires dom to be eps-dense in src and im mu-dense in dst; the failure
    carries the uncovered witness point.
    """
    _check_dense(rel.src, rel.dom, eps, "dom")
    _check_dense(rel.dst, rel.im, mu, "im")
    d = rel.src.dmat
    D = rel.dst.dmat
    pairs = set()
    for x in rel.src.ids:
        for y in rel.dst.ids:
            i, j = rel.src.index(x), rel.dst.index(y)
            for a, b in rel.pairs:
                if d[i, rel.src.index(a)] <= eps and D[j, rel.dst.index(b)] <= mu:
                    pairs.add((x, y))
                    break
    return Relation(src=rel.src, dst=rel.dst, pairs=pairs)


def _masks_to_relation(masks, src, dst) -> Relation:
    pairs = set()
    for i, mask in enumerate(masks):
        for j in range(len(dst)):
            if (int(mask) >> j) & 1:
                pairs.add((src.ids[i], dst.ids[j]))
    return Relation(src=src, dst=dst, pairs=pairs)


def gh_exact_small(
    src: FiniteMetricSpace, dst: FiniteMetricSpace, cap: int = DEFAULT_CAP
) -> GHResult:
    """Exact GH distance by pruned enumeration of all correspondences."""
    return _gh_exact(src, dst, cap, None, None)


def gh_pointed(
    src: FiniteMetricSpace, x0: str, dst: FiniteMetricSpace, y0: str, cap: int = DEFAULT_CAP
) -> GHResult:
    """Exact pointed GH distance: correspondences forced to contain (x0, y0)."""
    return _gh_exact(src, dst, cap, x0, y0)


def _gh_exact(src, dst, cap, x0, y0) -> GHResult:
    size = len(src) * len(dst)
    if size > cap:
        raise CapExceededError(size, cap)
    flipped = len(src) > len(dst)
    a, b = (dst, src) if flipped else (src, dst)
    fa, fb = (y0, x0) if flipped else (x0, y0)
    fi = a.index(fa) if fa is not None else -1
    fj = b.index(fb) if fb is not None else -1
    value, masks = kernels.gh_search(a.dmat, b.dmat, math.inf, fi, fj)
    if masks is None:
        raise RuntimeError("exact search returned no correspondence")
    witness = _masks_to_relation(masks, a, b)
    if flipped:
        witness = witness.transpose()
    return GHResult(value=float(value), witness=witness, kind="exact")


def gh_upper_bound(src: FiniteMetricSpace, dst: FiniteMetricSpace) -> GHResult:
    """Cheap upper bound: best of a family of greedy map-pair correspondences,
    then single-pair reassignment descent.  Always >= the exact value."""
    best = None
    for pairs in _candidate_correspondences(src, dst):
        pairs = _local_improve(src, dst, pairs)
        rel = Relation(src=src, dst=dst, pairs=pairs)
        acc = relation_stats(rel).accuracy
        if best is None or acc < best[0]:
            best = (acc, rel)
    return GHResult(value=best[0], witness=best[1], kind="upper-bound")


def _acc_of_pairs(src, dst, pairs) -> float:
    rel = Relation(src=src, dst=dst, pairs=pairs)
    return relation_stats(rel).accuracy


def _candidate_correspondences(src, dst):
    n, m = len(src), len(dst)
    if n == m:
        yield {(src.ids[i], dst.ids[i]) for i in range(n)}
    yield _greedy(src, dst)
    yield {(a, b) for b, a in _greedy(dst, src)}


def _greedy(src, dst) -> set:
    d, D = src.dmat, dst.dmat
    n, m = len(src), len(dst)
    assigned = []  # (i, j)
    pairs = set()

    def incremental(i, j):
        worst = 0.0
        for i2, j2 in assigned:
            worst = max(worst, abs(D[j, j2] - d[i, i2]))
        return worst

    for i in range(n):
        j = min(range(m), key=lambda j: (incremental(i, j), j))
        assigned.append((i, j))
        pairs.add((src.ids[i], dst.ids[j]))
    covered = {j for _, j in assigned}
    for j in range(m):
        if j in covered:
            continue
        i = min(range(n), key=lambda i: (incremental(i, j), i))
        assigned.append((i, j))
        pairs.add((src.ids[i], dst.ids[j]))
    return pairs


def _local_improve(src, dst, pairs, sweeps: int = 3) -> set:
    pairs = set(pairs)
    for _ in range(sweeps):
        improved = False
        acc = _acc_of_pairs(src, dst, pairs)
        for x, y in sorted(pairs):
            for y2 in dst.ids:
                if y2 == y:
                    continue
                trial = (pairs - {(x, y)}) | {(x, y2)}
                dom_ok = {a for a, _ in trial} == set(src.ids)
                im_ok = {b for _, b in trial} == set(dst.ids)
                if not (dom_ok and im_ok):
                    continue
                a2 = _acc_of_pairs(src, dst, trial)
                if a2 < acc - 1e-15:
                    pairs, acc, improved = trial, a2, True
        if not improved:
            break
    return pairs
