"""Build script: compiles the optional speckle kernel extension.

The package must install even where no C toolchain exists, so a failed
extension build downgrades to the pure numpy backend instead of aborting.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class BuildFailed(Exception):
    pass


class optional_build_ext(build_ext):
    def run(self):
        try:
            build_ext.run(self)
        except (PlatformError, FileNotFoundError) as exc:
            raise BuildFailed() from exc

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except (CCompilerError, ExecError, PlatformError, ValueError) as exc:
            raise BuildFailed() from exc


def native_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "fanforge.kernels._speckle",
        sources=[os.path.join("src", "fanforge", "kernels", "_speckle.pyx")],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


def run_setup(with_extension):
    kwargs = {}
    if with_extension:
        exts = native_extensions()
        if exts:
            kwargs["ext_modules"] = exts
            kwargs["cmdclass"] = {"build_ext": optional_build_ext}
    setup(**kwargs)


try:
    run_setup(True)
except BuildFailed:
    print("WARNING: speckle kernel extension failed to build; "
          "installing with the pure numpy backend only.")
    run_setup(False)
