import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "safechain._kernels._fast",
                ["src/safechain/_kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                # no -ffast-math: the compiled kernels must be bit-identical
                # to the pure-Python reference backend
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
