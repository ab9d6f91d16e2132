import os

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize
except ImportError:  # the package still works through its pure-Python kernels
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("OTNBR_NO_EXT"):
    ext_modules = cythonize(
        [Extension("otnbr._kernels", ["src/otnbr/_kernels.pyx"], include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
