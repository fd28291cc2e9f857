"""Build script for the optional compiled kernel.

The package is pure Python plus one Cython extension holding the hot
chain-update loops. The extension is marked optional: if no compiler is
available the install still succeeds and the package falls back to the
numpy implementation at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "slcreduce._kernels_cy",
                sources=["src/slcreduce/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
