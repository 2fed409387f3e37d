"""Build script: compiles the hot-kernel extension when Cython is available.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile is not fatal for pure-Python installs:
run with FOVTRACK_SKIP_EXT=1 to skip the extension entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FOVTRACK_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "fovtrack._kernels",
                    ["src/fovtrack/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
