"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure numpy fallback is selected
at import time); set CONSFLOW_SKIP_EXT=1 to skip compiling it.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("CONSFLOW_SKIP_EXT"):
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "consflow._kernels._core",
                ["src/consflow/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
