"""Build the optional compiled kernel; the package falls back to NumPy without it."""
import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


def _openmp_flags():
    if sys.platform.startswith("linux") and not os.environ.get("CONVEYORSYNC_NO_OPENMP"):
        return ["-fopenmp"], ["-fopenmp"]
    return [], []


ext_modules = []
if cythonize is not None:
    compile_args, link_args = _openmp_flags()
    ext_modules = cythonize(
        [
            Extension(
                "conveyorsync._kernels",
                ["src/conveyorsync/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"] + compile_args,
                extra_link_args=link_args,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
