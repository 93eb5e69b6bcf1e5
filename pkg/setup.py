"""Build the optional compiled kernel; the package works without it.

``TAUCOVER_NO_EXT=1`` skips the extension. A missing Cython or a failing
compiler also falls back to the numpy kernel instead of aborting the install.
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken
            print(f"taucover: compiled kernel skipped ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"taucover: compiled kernel skipped ({exc})", file=sys.stderr)


ext_modules = []
if os.environ.get("TAUCOVER_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("taucover._kernels", ["src/taucover/_kernels.pyx"],
                       extra_compile_args=["-O3", "-fopenmp"], extra_link_args=["-fopenmp"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
