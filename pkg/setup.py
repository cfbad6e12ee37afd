from setuptools import setup, Extension
from Cython.Build import cythonize
import numpy as np

# no fast-math: the compiled loops must match the Python fallback bit for bit
ext_modules = [Extension(
    "sharpint.dynamics._kmc",
    sources=["src/sharpint/dynamics/_kmc.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off"],
)]

setup(
    ext_modules=cythonize(ext_modules, compiler_directives={"language_level": "3"}),
)
