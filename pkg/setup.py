"""Build script: compiles the optional DP kernel extension when possible.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any build failure here downgrades to a warning
instead of aborting the install.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; installing with the pure-Python kernels")
        return []
    from setuptools import Extension

    ext = Extension(
        "seqplan._kernels._speedups",
        ["src/seqplan/_kernels/_speedups.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


class optional_build_ext(build_ext):
    """Swallow compiler failures; the fallback kernels take over."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"extension build failed ({exc}); using pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"building {ext.name} failed ({exc}); using pure-Python kernels")


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
