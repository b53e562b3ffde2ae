"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure NumPy fallback is selected
at import time); set RIGSERVE_NO_EXT=1 to skip compilation entirely.
-ffp-contract=off keeps the compiled math bit-identical to the fallback:
no fused multiply-adds, one IEEE rounding per operation on both paths.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("RIGSERVE_NO_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rigserve.kernels._speed",
                ["src/rigserve/kernels/_speed.pyx"],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
