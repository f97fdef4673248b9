"""Riemannian structures through the geodesic exponential.

Two flavors: a generic chart with a user metric tensor, where exp
integrates the geodesic equation (fixed-step RK4) and log inverts it by
damped-Newton shooting, and the closed-form unit sphere chart used where
machine-precision dilations are required.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dilstruct.dilation import DilationStructure
from dilstruct.metric import OutOfDomainError


class NoLogError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"geodesic shooting failed to converge (residual {residual:.3g})")
        self.residual = residual


@dataclass
class RiemannianExpSpace:
    """Chart with a positive-definite metric tensor field.

    exp integrates x'' = -Gamma(x', x') from (x, v) over unit time;
    Christoffel symbols come from central differences of the tensor.
    """

    metric_tensor: object  # x -> (n, n) SPD array
    dim: int
    chart_radius: float = 1.0
    steps_per_unit: int = 40
    min_steps: int = 8
    fd_step: float = 1e-6
    name: str = "riemannian"

    def metric(self, x) -> np.ndarray:
        return np.asarray(self.metric_tensor(np.asarray(x, float)), dtype=float)

    def christoffel(self, x) -> np.ndarray:
        n = self.dim
        h = self.fd_step
        dg = np.empty((n, n, n))  # dg[k] = d g / d x_k
        x = np.asarray(x, float)
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            dg[k] = (self.metric(x + e) - self.metric(x - e)) / (2 * h)
        ginv = np.linalg.inv(self.metric(x))
        # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij),
        # with dg[k, a, b] = d_k g_ab
        t = dg + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg)
        return 0.5 * np.einsum("kl,ijl->kij", ginv, t)

    def _rhs(self, state):
        n = self.dim
        pos, vel = state[:n], state[n:]
        gamma = self.christoffel(pos)
        acc = -np.einsum("kij,i,j->k", gamma, vel, vel)
        return np.concatenate([vel, acc])

    def exp(self, x, v) -> np.ndarray:
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        speed = math.sqrt(float(v @ self.metric(x) @ v))
        n_steps = max(self.min_steps, math.ceil(self.steps_per_unit * speed))
        h = 1.0 / n_steps
        state = np.concatenate([x, v])
        for _ in range(n_steps):
            k1 = self._rhs(state)
            k2 = self._rhs(state + 0.5 * h * k1)
            k3 = self._rhs(state + 0.5 * h * k2)
            k4 = self._rhs(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        end = state[: self.dim]
        if np.linalg.norm(end) > self.chart_radius:
            raise OutOfDomainError("geodesic left the chart")
        return end

    def log(self, x, y, tol: float = 1e-10, max_iter: int = 60) -> np.ndarray:
        """Initial velocity of the unit-time geodesic from x to y, by
        damped Newton on the endpoint map with finite-difference Jacobian."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        v = y - x
        res = self.exp(x, v) - y
        err = np.linalg.norm(res)
        h = 1e-6
        for _ in range(max_iter):
            if err < tol:
                return v
            jac = np.empty((self.dim, self.dim))
            for k in range(self.dim):
                e = np.zeros(self.dim)
                e[k] = h
                jac[:, k] = (self.exp(x, v + e) - self.exp(x, v - e)) / (2 * h)
            try:
                dv = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                raise NoLogError(float(err)) from None
            lam = 1.0
            while lam > 1e-4:
                v_new = v + lam * dv
                try:
                    res_new = self.exp(x, v_new) - y
                except OutOfDomainError:
                    lam *= 0.5
                    continue
                if np.linalg.norm(res_new) < err:
                    v, res, err = v_new, res_new, float(np.linalg.norm(res_new))
                    break
                lam *= 0.5
            else:
                break
        if err < tol:
            return v
        raise NoLogError(float(err))


def riemann_exp(R: RiemannianExpSpace, x, v) -> np.ndarray:
    return R.exp(x, v)


def riemann_log(R: RiemannianExpSpace, x, y) -> np.ndarray:
    return R.log(x, y)


def riemann_dilate(R: RiemannianExpSpace, x, eps: float, y) -> np.ndarray:
    return R.exp(x, eps * R.log(x, y))


def riemann_handle(R: RiemannianExpSpace, domain_radius: float | None = None) -> DilationStructure:
    def dist(u, v):
        w = R.log(u, v)
        return math.sqrt(float(w @ R.metric(u) @ w))

    def dil(x, eps, y):
        return riemann_dilate(R, x, eps, y)

    def tangent_dist(x, u, v):
        # the rescaled distances converge to the tangent-space norm of
        # the log difference at the base point
        w = R.log(x, u) - R.log(x, v)
        return math.sqrt(float(w @ R.metric(x) @ w))

    r = domain_radius if domain_radius is not None else 0.5 * R.chart_radius

    return DilationStructure(
        name=R.name,
        dim=R.dim,
        dist=dist,
        dil=dil,
        domain_radius=lambda x: r,
        tangent_dist=tangent_dist,
        meta={"kind": "riemannian", "space": R, "log": R.log},
    )


def sphere_tensor():
    """Stereographic metric of the unit sphere: 4/(1+|p|^2)^2 times identity."""

    def tensor(p):
        lam = 4.0 / (1.0 + float(p @ p)) ** 2
        return lam * np.eye(len(p))

    return tensor


def sphere_exp_space(chart_radius: float = 2.5, **kw) -> RiemannianExpSpace:
    return RiemannianExpSpace(
        metric_tensor=sphere_tensor(), dim=2, chart_radius=chart_radius, name="sphere-ode", **kw
    )


# -- closed-form unit sphere chart ------------------------------------

def _embed(p):
    p = np.asarray(p, float)
    s = float(p @ p)
    return np.array([2 * p[0], 2 * p[1], 1.0 - s]) / (1.0 + s)


def _unembed(X):
    return np.array([X[0], X[1]]) / (1.0 + X[2])


def sphere_log3(x, y) -> np.ndarray:
    """Tangent vector at embed(x) pointing to embed(y), length = arc distance."""
    X, Y = _embed(x), _embed(y)
    c = float(np.clip(X @ Y, -1.0, 1.0))
    cross = np.cross(X, Y)
    s = float(np.linalg.norm(cross))
    theta = math.atan2(s, c)
    if s < 1e-300:
        return np.zeros(3)
    direction = (Y - c * X) / s
    return theta * direction


def sphere_chart(domain_radius: float = 2.2) -> DilationStructure:
    """The unit sphere in its stereographic chart with closed-form
    geodesic exponential; dilations are exact to machine precision."""

    def dist(u, v):
        X, Y = _embed(u), _embed(v)
        return math.atan2(float(np.linalg.norm(np.cross(X, Y))), float(np.clip(X @ Y, -1, 1)))

    def dil(x, eps, y):
        X = _embed(x)
        V = eps * sphere_log3(x, y)
        theta = float(np.linalg.norm(V))
        if theta == 0.0:
            return np.asarray(x, float).copy()
        Y = math.cos(theta) * X + math.sin(theta) * (V / theta)
        return _unembed(Y)

    def tangent_dist(x, u, v):
        return float(np.linalg.norm(sphere_log3(x, u) - sphere_log3(x, v)))

    return DilationStructure(
        name="sphere",
        dim=2,
        dist=dist,
        dil=dil,
        domain_radius=lambda x: domain_radius,
        tangent_dist=tangent_dist,
        meta={"kind": "sphere", "log3": sphere_log3, "embed": _embed},
    )
