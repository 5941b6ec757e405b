"""Build the optional compiled DBM kernels.

Without Cython (or a C compiler) the package installs pure-Python and the
kernel selector falls back automatically.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("LIFTEX_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("liftex._dbm_c", ["src/liftex/_dbm_c.pyx"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
