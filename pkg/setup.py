"""Build script for the optional compiled kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and ``aronsson._backend`` falls back to the
numpy implementation.
"""
import os
import sys

import numpy as np
from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: compiled kernels not built ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def extensions():
    if os.environ.get("ARONSSON_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    openmp = [] if os.environ.get("ARONSSON_NO_OPENMP") else ["-fopenmp"]
    ext = Extension(
        "aronsson._kernels",
        ["src/aronsson/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"] + openmp,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
