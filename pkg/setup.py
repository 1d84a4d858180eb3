"""Build script for the optional compiled agreement kernel.

The package is fully functional without the extension (a pure-Python
kernel is selected at import time); the extension only speeds up the
bootstrap resampling loops.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "dialrel.agreement._kernel_c",
                sources=["src/dialrel/agreement/_kernel_c.pyx"],
                # keep float contraction off so the compiled kernel matches
                # the pure-Python accumulation bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
