import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("TOPOMAP_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "topomap._ckernels",
                ["src/topomap/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math / -march=native: results must stay bit-identical
                # to the pure-Python fallback
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
