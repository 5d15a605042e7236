import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# no fused multiply-add: the compiled kernel must round exactly like the Python one
ext = Extension(
    "rdrs_lab._kernels",
    ["src/rdrs_lab/_kernels.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
