"""Kernel backend selection.

Prefers the compiled Cython extension; falls back to the pure numpy
implementation when the extension is missing or when the environment
variable DILSTRUCT_PURE_PYTHON=1 is set.
"""
import os

if os.environ.get("DILSTRUCT_PURE_PYTHON") == "1":
    from dilstruct import _pykernels as _impl
else:
    try:
        from dilstruct import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from dilstruct import _pykernels as _impl

BACKEND = _impl.BACKEND

carnot_mul = _impl.carnot_mul
carnot_dil = _impl.carnot_dil
heis_mul = _impl.heis_mul
heis_inv = _impl.heis_inv
heis_dil = _impl.heis_dil
heis_gauge = _impl.heis_gauge
gh_search = _impl.gh_search
