"""Build the optional Cython kernels.

The package works without them: ``subbitsnn._ext`` falls back to numpy
implementations when the compiled modules cannot be imported.
"""
import os
import sys

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SUBBITSNN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("Cython not available; installing pure-Python kernels only", file=sys.stderr)
    else:
        openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
        extensions = [
            Extension(
                f"subbitsnn._ext.{name}",
                [f"src/subbitsnn/_ext/{name}.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"] + openmp,
                extra_link_args=openmp,
            )
            for name in ("_conv_ext", "_quant_ext")
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
