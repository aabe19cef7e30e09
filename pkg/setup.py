"""Builds the optional Cython decoder core; the package falls back to numpy without it."""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("POLARCRAFT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "polarcraft._kernels",
                ["src/polarcraft/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
