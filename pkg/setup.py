"""Build script for the optional compiled kernel.

The package is pure Python plus one Cython extension holding the per-iteration
hot loop. If Cython or a C compiler is missing the extension is skipped and
the numpy fallback is used at import time, so the install still works.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("LOOM_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "graphloom._kernel",
                    ["src/graphloom/_kernel.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    # -ffp-contract=off: no fused multiply-adds, so the
                    # kernel's float ops round exactly like the numpy path
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
