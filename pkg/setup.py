"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure numpy fallback is selected at
import time); set DILSTRUCT_PURE_PYTHON=1 to skip the build entirely.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("DILSTRUCT_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "dilstruct._ckernels",
                    sources=["src/dilstruct/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except Exception as exc:  # no compiler / no Cython: fall back to pure python
        print(f"dilstruct: skipping compiled kernels ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
