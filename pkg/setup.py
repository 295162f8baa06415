"""Builds the optional compiled LCS kernel; everything else lives in pyproject.toml."""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("chartsum._lcs", ["src/chartsum/_lcs.pyx"], optional=True)],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython at build time: install pure-Python only, the package falls
    # back to chartsum._lcs_py at import.
    extensions = []

setup(ext_modules=extensions)
