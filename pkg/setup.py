"""Build the optional compiled lane-kernel extension.

The package works without it: revec.kernels falls back to the pure-Python
implementation when the extension is missing or REVEC_PURE_PYTHON=1 is set.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("revec._kernels_c", ["src/revec/_kernels_c.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
