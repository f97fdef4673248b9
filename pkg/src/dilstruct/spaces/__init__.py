"""Built-in dilation structures and the space-spec registry."""
from __future__ import annotations

import json
import pathlib

from dilstruct.spaces.basic import euclidean, nonstandard_plane, snowflake
from dilstruct.spaces.carnot import (
    CarnotGroup,
    GradedPoint,
    GradingError,
    UnsupportedStepError,
    carnot_dilate,
    carnot_handle,
    carnot_invert,
    carnot_multiply,
    cc_norm_upper,
    engel,
    gauge_norm,
    heisenberg,
)
from dilstruct.spaces.riemann import (
    NoLogError,
    RiemannianExpSpace,
    riemann_dilate,
    riemann_exp,
    riemann_handle,
    riemann_log,
    sphere_chart,
    sphere_exp_space,
)


class SpaceSpecError(ValueError):
    pass


def construct_space(spec):
    """Build a dilation structure from a spec string or dict.

    String forms: "euclidean N", "snowflake N A", "nonstandard THETA",
    "heisenberg", "engel", "sphere", "sphere-ode", "carnot PATH.json".
    Dict forms use {"kind": ..., ...} with matching parameters.
    """
    if isinstance(spec, str):
        spec = _parse_string_spec(spec)
    kind = spec.get("kind")
    if kind == "euclidean":
        return euclidean(int(spec.get("dim", 2)))
    if kind == "snowflake":
        base = construct_space(spec.get("base", {"kind": "euclidean", "dim": spec.get("dim", 2)}))
        return snowflake(base, float(spec.get("exponent", 0.5)))
    if kind == "nonstandard":
        return nonstandard_plane(float(spec.get("theta", 1.0)))
    if kind == "heisenberg":
        return carnot_handle(heisenberg())
    if kind == "engel":
        return carnot_handle(engel())
    if kind == "carnot":
        if "table" in spec:
            table = spec["table"]
        elif "path" in spec:
            table = json.loads(pathlib.Path(spec["path"]).read_text())
        else:
            raise SpaceSpecError("carnot spec needs a bracket table or a path")
        try:
            return carnot_handle(CarnotGroup.from_table(table))
        except (GradingError, UnsupportedStepError) as exc:
            raise SpaceSpecError(f"invalid bracket table: {exc}") from exc
    if kind == "sphere":
        return sphere_chart()
    if kind == "sphere-ode":
        return riemann_handle(sphere_exp_space())
    if kind == "riemannian":
        tensor = spec.get("tensor", "sphere")
        if callable(tensor):
            space = RiemannianExpSpace(
                metric_tensor=tensor,
                dim=int(spec.get("dim", 2)),
                chart_radius=float(spec.get("chart_radius", 1.0)),
            )
            return riemann_handle(space)
        if tensor == "sphere":
            return riemann_handle(sphere_exp_space())
        raise SpaceSpecError(f"unknown metric tensor {tensor!r}")
    raise SpaceSpecError(f"unknown space kind {kind!r}")


def _parse_string_spec(text: str) -> dict:
    parts = text.split()
    if not parts:
        raise SpaceSpecError("empty space spec")
    head, args = parts[0], parts[1:]
    if head == "euclidean":
        return {"kind": "euclidean", "dim": int(args[0]) if args else 2}
    if head == "snowflake":
        return {
            "kind": "snowflake",
            "dim": int(args[0]) if args else 2,
            "exponent": float(args[1]) if len(args) > 1 else 0.5,
        }
    if head == "nonstandard":
        return {"kind": "nonstandard", "theta": float(args[0]) if args else 1.0}
    if head in ("heisenberg", "engel", "sphere", "sphere-ode"):
        return {"kind": head}
    if head == "riemannian":
        return {"kind": "riemannian", "tensor": args[0] if args else "sphere"}
    if head == "carnot":
        if not args:
            raise SpaceSpecError("carnot spec needs a table path")
        return {"kind": "carnot", "path": args[0]}
    raise SpaceSpecError(f"unknown space spec {text!r}")
