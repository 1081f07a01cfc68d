import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HYBRIDNAV_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "hybridnav._kernels",
                    ["src/hybridnav/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # results must match the pure-Python fallback bit for bit: no fast-math,
                    # no FMA contraction, and no sin/cos -> sincos fusion (glibc's sincos
                    # can differ from sin and cos in the last bit)
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-builtin-sin",
                                        "-fno-builtin-cos"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
