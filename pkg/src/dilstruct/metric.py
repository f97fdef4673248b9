"""Metric-space primitives: finite spaces, polyline curves, variation,
metric derivative, and the pair-groupoid view of a metric space."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from dilstruct.limits import ConvergenceReport, extract_limit

METRIC_TOL = 1e-12


class MalformedInputError(ValueError):
    pass


class DegenerateCurveError(ValueError):
    pass


class OutOfDomainError(ValueError):
    pass


@dataclass
class MetricViolation:
    axiom: str  # "diagonal" | "symmetry" | "nonneg" | "triangle"
    witness: tuple
    amount: float


@dataclass
class ValidationReport:
    violations: list[MetricViolation]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class FiniteMetricSpace:
    """A finite point set with an explicit distance matrix.

    ``ids`` are opaque labels; ``coords`` is an optional coordinate payload
    (used by samplers and serialization, never by the metric logic).
    """

    ids: list[str]
    dmat: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        self.dmat = np.asarray(self.dmat, dtype=float)

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, pid: str) -> int:
        try:
            return self.ids.index(pid)
        except ValueError:
            raise KeyError(f"unknown point id {pid!r}") from None

    def dist(self, a: str, b: str) -> float:
        return float(self.dmat[self.index(a), self.index(b)])

    @classmethod
    def from_points(cls, coords, ids=None) -> "FiniteMetricSpace":
        """Euclidean space on a coordinate cloud."""
        coords = np.asarray(coords, dtype=float)
        if ids is None:
            ids = [str(i) for i in range(len(coords))]
        diff = coords[:, None, :] - coords[None, :, :]
        dmat = np.sqrt((diff**2).sum(axis=-1))
        return cls(ids=list(ids), dmat=dmat, coords=coords)

    def to_json(self) -> str:
        return json.dumps({"ids": self.ids, "dmat": self.dmat.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FiniteMetricSpace":
        obj = json.loads(text)
        return cls(ids=list(obj["ids"]), dmat=np.asarray(obj["dmat"], dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(self.ids)
        for row in self.dmat:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FiniteMetricSpace":
        rows = list(csv.reader(io.StringIO(text)))
        ids = rows[0]
        dmat = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
        return cls(ids=ids, dmat=dmat)


def validate_metric(space: FiniteMetricSpace, tol: float = METRIC_TOL) -> ValidationReport:
    """Check the metric axioms, listing every violation with a witness."""
    d = space.dmat
    n = len(space)
    if d.ndim != 2 or d.shape != (n, n):
        raise MalformedInputError(f"distance matrix must be {n}x{n}, got {d.shape}")
    if np.isnan(d).any():
        raise MalformedInputError("distance matrix contains NaN")
    bad = []
    for i in range(n):
        if abs(d[i, i]) > tol:
            bad.append(MetricViolation("diagonal", (space.ids[i],), float(d[i, i])))
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] < -tol:
                bad.append(MetricViolation("nonneg", (space.ids[i], space.ids[j]), float(d[i, j])))
            gap = abs(d[i, j] - d[j, i])
            if gap > tol:
                bad.append(MetricViolation("symmetry", (space.ids[i], space.ids[j]), float(gap)))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                excess = d[i, k] - d[i, j] - d[j, k]
                if excess > tol:
                    bad.append(
                        MetricViolation(
                            "triangle", (space.ids[i], space.ids[j], space.ids[k]), float(excess)
                        )
                    )
    return ValidationReport(violations=bad)


@dataclass
class PolylineCurve:
    """A curve sampled at strictly increasing parameter values.

    Between knots the samples are interpolated linearly in coordinates;
    continuous curves enter the library only through such samplings.
    """

    knots: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.samples = np.asarray(self.samples, dtype=float)
        if self.knots.ndim != 1 or len(self.knots) != len(self.samples):
            raise MalformedInputError("knot/sample count mismatch")
        if np.any(np.diff(self.knots) <= 0):
            raise MalformedInputError("knots must be strictly increasing")

    def __len__(self) -> int:
        return len(self.knots)

    @property
    def t0(self) -> float:
        return float(self.knots[0])

    @property
    def t1(self) -> float:
        return float(self.knots[-1])

    def evaluate(self, t: float) -> np.ndarray:
        if t < self.knots[0] - 1e-12 or t > self.knots[-1] + 1e-12:
            raise OutOfDomainError(f"t={t} outside [{self.knots[0]}, {self.knots[-1]}]")
        t = min(max(t, self.knots[0]), self.knots[-1])
        k = int(np.searchsorted(self.knots, t, side="right")) - 1
        k = min(max(k, 0), len(self.knots) - 2)
        h = self.knots[k + 1] - self.knots[k]
        w = (t - self.knots[k]) / h
        return (1.0 - w) * self.samples[k] + w * self.samples[k + 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(self.samples.shape[1])])
        for t, p in zip(self.knots, self.samples):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in p])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PolylineCurve":
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        return cls(knots=data[:, 0], samples=data[:, 1:])


def variation_length(curve: PolylineCurve, dist) -> float:
    """Sum of successive sample distances (the variation of the polyline).

    Knot refinement can only increase the value, by the triangle inequality.
    """
    if len(curve) < 2:
        raise MalformedInputError("need at least 2 knots")
    return float(sum(dist(curve.samples[i], curve.samples[i + 1]) for i in range(len(curve) - 1)))


def reparameterize_unit_speed(curve: PolylineCurve, dist) -> PolylineCurve:
    """Reparameterize so successive knot gaps equal successive distances."""
    gaps = [dist(curve.samples[i], curve.samples[i + 1]) for i in range(len(curve) - 1)]
    total = float(sum(gaps))
    if total <= 0.0:
        raise DegenerateCurveError("curve has zero length")
    knots = np.concatenate([[curve.t0], curve.t0 + np.cumsum(gaps)])
    # collapse zero-length segments (coincident successive samples)
    keep = np.concatenate([[True], np.diff(knots) > 0])
    return PolylineCurve(knots=knots[keep], samples=curve.samples[keep])


def metric_derivative(curve: PolylineCurve, t: float, steps, dist) -> ConvergenceReport:
    """Two-sided difference quotients d(c(t+s), c(t)) / |s| over a step grid."""
    if not (curve.t0 < t < curve.t1):
        raise OutOfDomainError(f"t={t} must be interior to [{curve.t0}, {curve.t1}]")
    steps = np.asarray(steps, dtype=float)
    room = min(t - curve.t0, curve.t1 - t)
    if steps.max() > room:
        raise OutOfDomainError("step grid exceeds the distance to the boundary")
    ct = curve.evaluate(t)

    def sampler(s):
        fwd = dist(curve.evaluate(t + s), ct) / s
        bwd = dist(curve.evaluate(t - s), ct) / s
        return 0.5 * (fwd + bwd)

    return extract_limit(sampler, steps)


@dataclass
class TrivialGroupoidView:
    """The pair groupoid X x X of a finite metric space.

    Arrows are ordered pairs (x, y); the groupoid norm of an arrow is the
    distance between its ends, source alpha(x,y) = (y,y), target
    omega(x,y) = (x,x), composition (x,y)(y,z) = (x,z).
    """

    base: FiniteMetricSpace

    def arrows(self):
        for a in self.base.ids:
            for b in self.base.ids:
                yield (a, b)

    def norm(self, arrow) -> float:
        return self.base.dist(arrow[0], arrow[1])

    def alpha(self, arrow):
        return (arrow[1], arrow[1])

    def omega(self, arrow):
        return (arrow[0], arrow[0])

    def compose(self, g, h):
        if g[1] != h[0]:
            raise MalformedInputError(f"arrows {g} and {h} are not composable")
        return (g[0], h[1])

    def inverse(self, arrow):
        return (arrow[1], arrow[0])

    def right_translate(self, g, u):
        return self.compose(g, u)


def groupoid_fiber_distance(view: TrivialGroupoidView, x: str, u: str, v: str) -> float:
    """Distance between (u,x) and (v,x) inside the fiber over x.

    Computed through the groupoid algebra: norm of (u,x)(v,x)^{-1}; equals
    the base distance d(u,v), so each fiber is an isometric copy of X.
    """
    view.base.index(x)
    g = (u, x)
    h = (v, x)
    return view.norm(view.compose(g, view.inverse(h)))
