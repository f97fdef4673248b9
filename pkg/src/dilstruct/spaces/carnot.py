"""Graded nilpotent (Carnot) groups in exponential coordinates of the
first kind: truncated-BCH products, graded dilations, homogeneous gauges,
and explicit horizontal decompositions bounding the CC norm."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from dilstruct import kernels
from dilstruct.dilation import DilationStructure


class GradingError(ValueError):
    pass


class UnsupportedStepError(ValueError):
    pass


@dataclass
class CarnotGroup:
    """Bracket data of a graded Lie algebra, identified with its group.

    ``layer_dims`` lists the dimension of each layer V_1..V_m; ``bracket``
    is the dense antisymmetric tensor [i, j, k] -> e_k component of
    [e_i, e_j].  Products use the BCH series, which terminates for
    step <= 3 (higher steps are rejected).
    """

    layer_dims: tuple
    bracket: np.ndarray
    name: str = "carnot"

    deg: np.ndarray = field(init=False)
    step: int = field(init=False)
    dim: int = field(init=False)

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        self.step = len(self.layer_dims)
        if self.step > 3:
            raise UnsupportedStepError(f"step {self.step} > 3 is not supported")
        self.dim = sum(self.layer_dims)
        self.deg = np.repeat(np.arange(1, self.step + 1), self.layer_dims)
        self.bracket = np.asarray(self.bracket, dtype=float)
        if self.bracket.shape != (self.dim,) * 3:
            raise GradingError("bracket tensor has wrong shape")
        self._is_heis = (
            self.layer_dims == (2, 1)
            and abs(self.bracket[0, 1, 2] - 1.0) < 1e-15
            and abs(float(np.abs(self.bracket).sum()) - 2.0) < 1e-15
        )
        self._validate()

    def _validate(self):
        if np.abs(self.bracket + self.bracket.transpose(1, 0, 2)).max() > 1e-14:
            raise GradingError("bracket tensor must be antisymmetric in (i, j)")
        for i in range(self.dim):
            for j in range(self.dim):
                for k in range(self.dim):
                    if self.bracket[i, j, k] != 0.0 and self.deg[k] != self.deg[i] + self.deg[j]:
                        raise GradingError(
                            f"bracket [{i},{j}] -> {k} violates the grading "
                            f"({self.deg[i]}+{self.deg[j]} != {self.deg[k]})"
                        )
        # V_{l+1} = [V_1, V_l]: elementary left-normed brackets must span each layer
        for level in range(2, self.step + 1):
            words = self._bracket_words(level)
            vecs = [self._word_vector(w) for w in words]
            idx = self.layer_slice(level)
            mat = np.array([v[idx] for v in vecs]) if vecs else np.zeros((0, idx.stop - idx.start))
            if np.linalg.matrix_rank(mat) < self.layer_dims[level - 1]:
                raise GradingError(f"layer {level} is not generated by brackets of V_1")
        # associativity of the truncated product, spot-checked
        rng = np.random.default_rng(12345)
        for _ in range(20):
            g, h, k = rng.standard_normal((3, self.dim))
            lhs = self.multiply(self.multiply(g, h), k)
            rhs = self.multiply(g, self.multiply(h, k))
            if np.abs(lhs - rhs).max() > 1e-10 * max(1.0, np.abs(lhs).max()):
                raise GradingError("bracket table yields a non-associative product")

    def layer_slice(self, level: int) -> slice:
        start = sum(self.layer_dims[: level - 1])
        return slice(start, start + self.layer_dims[level - 1])

    @property
    def homogeneous_dimension(self) -> int:
        return int(sum((i + 1) * d for i, d in enumerate(self.layer_dims)))

    def multiply(self, g, h) -> np.ndarray:
        if self._is_heis:
            return kernels.heis_mul(g, h)
        return kernels.carnot_mul(g, h, self.bracket, self.step)

    def invert(self, g) -> np.ndarray:
        if self._is_heis:
            return kernels.heis_inv(g)
        return -np.asarray(g, dtype=float)

    def dilate(self, eps: float, g) -> np.ndarray:
        if self._is_heis:
            return kernels.heis_dil(eps, g)
        return kernels.carnot_dil(float(eps), g, self.deg.astype(np.int64))

    def gauge_norm(self, g) -> float:
        """Exactly homogeneous analytic gauge.

        Heisenberg uses the Cygan-Koranyi gauge, whose induced left-invariant
        distance is a true metric; other tables get the layerwise max gauge
        max_l ||x_l||^(1/l), which is homogeneous but only a quasi-metric in
        general (triangle defects are checked by tests, not assumed).
        """
        if self._is_heis:
            return float(kernels.heis_gauge(g))
        g = np.asarray(g, dtype=float)
        return float(
            max(
                np.linalg.norm(g[self.layer_slice(l)]) ** (1.0 / l)
                for l in range(1, self.step + 1)
            )
        )

    def embed_horizontal(self, h) -> np.ndarray:
        out = np.zeros(self.dim)
        out[: self.layer_dims[0]] = h
        return out

    def horizontal_part(self, g) -> np.ndarray:
        return np.asarray(g, dtype=float)[: self.layer_dims[0]]

    # -- horizontal decompositions -------------------------------------

    def _bracket_words(self, level: int):
        m = self.layer_dims[0]
        if level == 2:
            return [(i, j) for i in range(m) for j in range(i + 1, m)]
        words = []
        for i in range(m):
            for w in self._bracket_words(level - 1):
                words.append((i,) + w)
        return words

    def _word_vector(self, word) -> np.ndarray:
        if len(word) == 1:
            e = np.zeros(self.dim)
            e[word[0]] = 1.0
            return e
        inner = self._word_vector(word[1:])
        e = np.zeros(self.dim)
        e[word[0]] = 1.0
        return np.einsum("ijk,i,j->k", self.bracket, e, inner)

    def _commutator_moves(self, word, scales):
        """Horizontal moves realizing the group commutator of scaled
        exponentials along a left-normed bracket word."""
        if len(word) == 1:
            return [scales[0] * self._basis_h(word[0])]
        inner = self._commutator_moves(word[1:], scales[1:])
        a = [scales[0] * self._basis_h(word[0])]
        inv_a = [-m for m in a]
        inv_inner = [-m for m in reversed(inner)]
        return a + inner + inv_a + inv_inner

    def _basis_h(self, i) -> np.ndarray:
        e = np.zeros(self.layer_dims[0])
        e[i] = 1.0
        return e

    def horizontal_decomposition(self, g, tol: float = 1e-9):
        """Write g as a product of exponentials of horizontal vectors.

        Peels one layer at a time: a single first-layer move, then
        commutator gadgets whose scalings are the |coefficient|^(1/level)
        roots, recomputing the exact group residual between stages.
        Returns the list of horizontal moves (V_1 vectors).
        """
        g = np.asarray(g, dtype=float)
        moves = [self.horizontal_part(g).copy()]
        for level in range(2, self.step + 1):
            prod = self._product_of_moves(moves)
            residual = self.multiply(self.invert(prod), g)
            target = residual[self.layer_slice(level)]
            if np.linalg.norm(target) <= tol:
                continue
            words = self._bracket_words(level)
            cols = np.array([self._word_vector(w)[self.layer_slice(level)] for w in words]).T
            coeffs, *_ = np.linalg.lstsq(cols, target, rcond=None)
            for w, c in zip(words, coeffs):
                if abs(c) <= tol:
                    continue
                s = abs(c) ** (1.0 / level)
                scales = [np.sign(c) * s] + [s] * (level - 1)
                moves.extend(self._commutator_moves(w, scales))
        prod = self._product_of_moves(moves)
        # coordinate residual: the gauge roots would inflate roundoff
        err = float(np.linalg.norm(prod - g))
        if err > 1e-9 * max(1.0, float(np.linalg.norm(g))):
            raise GradingError(f"horizontal decomposition failed to close (residual {err:.3g})")
        return moves

    def _product_of_moves(self, moves) -> np.ndarray:
        prod = np.zeros(self.dim)
        for h in moves:
            prod = self.multiply(prod, self.embed_horizontal(h))
        return prod

    def to_table(self) -> dict:
        triples = []
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                for k in range(self.dim):
                    if self.bracket[i, j, k] != 0.0:
                        triples.append([i, j, k, float(self.bracket[i, j, k])])
        return {"step": self.step, "dims": list(self.layer_dims), "brackets": triples}

    @classmethod
    def from_table(cls, table: dict, name: str = "carnot") -> "CarnotGroup":
        dims = tuple(table["dims"])
        n = sum(dims)
        bracket = np.zeros((n, n, n))
        for i, j, k, c in table["brackets"]:
            bracket[i, j, k] += float(c)
            bracket[j, i, k] -= float(c)
        return cls(layer_dims=dims, bracket=bracket, name=name)

    @classmethod
    def from_json(cls, text: str, name: str = "carnot") -> "CarnotGroup":
        return cls.from_table(json.loads(text), name=name)


def heisenberg() -> CarnotGroup:
    """The first Heisenberg group: R^3, [e1, e2] = e3."""
    b = np.zeros((3, 3, 3))
    b[0, 1, 2] = 1.0
    b[1, 0, 2] = -1.0
    return CarnotGroup(layer_dims=(2, 1), bracket=b, name="heisenberg")


def engel() -> CarnotGroup:
    """A step-3 group on R^4: [e1, e2] = e3, [e1, e3] = e4."""
    b = np.zeros((4, 4, 4))
    b[0, 1, 2] = 1.0
    b[1, 0, 2] = -1.0
    b[0, 2, 3] = 1.0
    b[2, 0, 3] = -1.0
    return CarnotGroup(layer_dims=(2, 1, 1), bracket=b, name="engel")


# spec-facing functional aliases

def carnot_multiply(G: CarnotGroup, g, h) -> np.ndarray:
    return G.multiply(g, h)


def carnot_invert(G: CarnotGroup, g) -> np.ndarray:
    return G.invert(g)


def carnot_dilate(G: CarnotGroup, eps: float, g) -> np.ndarray:
    return G.dilate(eps, g)


def gauge_norm(G: CarnotGroup, g) -> float:
    return G.gauge_norm(g)


def cc_norm_upper(G: CarnotGroup, g) -> float:
    """Sum of move lengths of an explicit horizontal decomposition; an
    upper bound for the CC norm."""
    return float(sum(np.linalg.norm(h) for h in G.horizontal_decomposition(g)))


@dataclass
class GradedPoint:
    """A group element with layer-structured access to its coordinates."""

    group: CarnotGroup
    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.shape != (self.group.dim,):
            raise ValueError(f"expected {self.group.dim} coordinates")

    def layer(self, level: int) -> np.ndarray:
        return self.coords[self.group.layer_slice(level)]

    def __mul__(self, other: "GradedPoint") -> "GradedPoint":
        return GradedPoint(self.group, self.group.multiply(self.coords, other.coords))

    def inverse(self) -> "GradedPoint":
        return GradedPoint(self.group, self.group.invert(self.coords))


def carnot_handle(G: CarnotGroup) -> DilationStructure:
    """Dilation structure of a Carnot group: left-invariant gauge distance,
    dilations transported by left translation.  Conical, so the tangent
    distance coincides with the distance itself."""

    def dist(u, v):
        return G.gauge_norm(G.multiply(G.invert(u), v))

    def dil(x, eps, y):
        return G.multiply(x, G.dilate(eps, G.multiply(G.invert(x), y)))

    return DilationStructure(
        name=G.name,
        dim=G.dim,
        dist=dist,
        dil=dil,
        domain_radius=lambda x: np.inf,
        tangent_dist=lambda x, u, v: dist(u, v),
        meta={"kind": "carnot", "group": G},
    )
