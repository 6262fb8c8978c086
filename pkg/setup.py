"""Build script for the optional compiled kernel core.

The package works without the extension (a pure-numpy backend is selected at
import time), so any failure to cythonize or compile downgrades to a
source-only install instead of aborting.
"""

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "rofaccel.kernels._fastcore",
        ["src/rofaccel/kernels/_fastcore.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off: the float32 kernels must round every multiply and
        # add separately; a fused multiply-add would change the low bits and
        # break parity with the pure-numpy backend.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
