"""Build script for the compiled matching/decomposition kernels.

The extension is optional: when Cython or a C compiler is missing, the
package falls back to the pure-Python kernels at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("calibrank._kernels", ["src/calibrank/_kernels.pyx"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
