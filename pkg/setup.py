import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional: if Cython is missing the package falls
# back to the pure-numpy backend selected at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "teleloop._kernels._ckin",
                ["src/teleloop/_kernels/_ckin.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
