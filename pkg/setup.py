"""Build script: compiles the optional Cython rank/KS kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile only costs speed. Set MCPLOC_SKIP_EXT=1
to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("MCPLOC_SKIP_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "mcploc._ckernels",
        sources=["src/mcploc/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
