"""Build script for the optional compiled sampling kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so any build failure here is non-fatal for users who
install with ``--no-binary`` style restrictions.
"""
from setuptools import setup, Extension

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy

    ext_modules = cythonize(
        [
            Extension(
                "idmc._kernels",
                ["src/idmc/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
