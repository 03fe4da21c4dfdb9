"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure-numpy fallbacks are selected
at import time), so any build failure here is non-fatal by design: install
with HOROLAB_SKIP_NATIVE=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("HOROLAB_SKIP_NATIVE"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "horolab._kernels._speedups",
                    ["src/horolab/_kernels/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    # Contraction off: the pure-numpy fallback must stay
                    # bit-identical to the compiled kernels.
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
