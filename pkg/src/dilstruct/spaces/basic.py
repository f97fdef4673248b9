"""Flat model spaces: Euclidean, snowflaked, and the rotation-twisted
plane whose dilations spin while they contract."""
from __future__ import annotations

import math

import numpy as np

from dilstruct.dilation import DilationStructure


def euclidean(n: int) -> DilationStructure:
    def dist(x, y):
        return float(np.linalg.norm(np.asarray(y, float) - np.asarray(x, float)))

    def dil(x, eps, y):
        x = np.asarray(x, float)
        return x + eps * (np.asarray(y, float) - x)

    return DilationStructure(
        name=f"euclidean{n}",
        dim=n,
        dist=dist,
        dil=dil,
        domain_radius=lambda x: np.inf,
        tangent_dist=lambda x, u, v: dist(u, v),
        meta={"kind": "euclidean"},
    )


def snowflake(base: DilationStructure, a: float) -> DilationStructure:
    """Snowflaked structure: d^a with dilations reparameterized by eps^(1/a).

    For conical bases the rescaled distances are eps-independent, so the
    tangent distance equals d^a exactly.
    """
    if not (0.0 < a <= 1.0):
        raise ValueError("snowflake exponent must lie in (0, 1]")

    def dist(x, y):
        return base.dist(x, y) ** a

    def dil(x, eps, y):
        return base.dil(x, eps ** (1.0 / a), y)

    tangent = None
    if base.tangent_dist is not None:
        tangent = lambda x, u, v: base.tangent_dist(x, u, v) ** a  # noqa: E731
    return DilationStructure(
        name=f"snowflake({base.name},a={a:g})",
        dim=base.dim,
        dist=dist,
        dil=dil,
        domain_radius=base.domain_radius,
        tangent_dist=tangent,
        meta={"kind": "snowflake", "base": base, "exponent": a},
    )


def nonstandard_plane(theta: float) -> DilationStructure:
    """Euclidean plane with dilations eps^(1+i*theta) acting on R^2 = C.

    Each dilation is a rotation by theta*log(eps) composed with the scaling
    by eps, hence (1/eps) |dil(x,eps,u) - dil(x,eps,v)| = |u - v| exactly.
    """

    def dist(x, y):
        return float(np.linalg.norm(np.asarray(y, float) - np.asarray(x, float)))

    def dil(x, eps, y):
        x = np.asarray(x, float)
        w = np.asarray(y, float) - x
        ang = theta * math.log(eps)
        c, s = math.cos(ang), math.sin(ang)
        rot = np.array([c * w[0] - s * w[1], s * w[0] + c * w[1]])
        return x + eps * rot

    return DilationStructure(
        name=f"nonstandard(theta={theta:g})",
        dim=2,
        dist=dist,
        dil=dil,
        domain_radius=lambda x: np.inf,
        tangent_dist=lambda x, u, v: dist(u, v),
        meta={"kind": "nonstandard", "theta": theta},
    )
