"""Build script: compiles the fixed-point kernel extension when Cython is available.

The package works without the extension (a pure-numpy fallback is selected at
import time), so a failed extension build only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "rmt_irs._fpcore",
                ["src/rmt_irs/_fpcore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
            "embedsignature": True,
        },
    )

setup(ext_modules=ext_modules)
