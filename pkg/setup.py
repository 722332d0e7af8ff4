"""Build the optional Cython kernels; the package falls back to numpy without them.

The kernels are tuned for the build machine (``-march=native``) unless
``ASSORTMATCH_PORTABLE=1`` is set; the build retries with portable flags when
the compiler rejects the native ones.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext

BASE_FLAGS = ["-O3", "-ffast-math"]
NATIVE_FLAGS = ["-march=native"]


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler available
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
            return
        except Exception as exc:
            if not set(NATIVE_FLAGS) & set(ext.extra_compile_args):
                print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")
                return
        ext.extra_compile_args = [f for f in ext.extra_compile_args if f not in NATIVE_FLAGS]
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    flags = BASE_FLAGS + ([] if os.environ.get("ASSORTMATCH_PORTABLE") == "1" else NATIVE_FLAGS)
    ext = Extension(
        "assortmatch._ckernels",
        ["src/assortmatch/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=flags,
        libraries=["m"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
