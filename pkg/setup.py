import os

from setuptools import setup

# The compiled kernels are optional: set MSE_ADJUST_PURE_PYTHON=1 (or install
# without Cython) to skip the extension and run on the numpy fallback instead.
ext_modules = []
if os.environ.get("MSE_ADJUST_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/mse_adjust/_kernels.pyx"],
            language_level="3",
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
