"""Build script: compiles the optional recurrent-core extension.

The package works without the extension (pure-numpy fallback is selected
at import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "kifa.net._core_cy",
                ["src/kifa/net/_core_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - environment without a compiler
    print(f"kifa: skipping compiled core ({exc}); pure-python fallback will be used",
          file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
