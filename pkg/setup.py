"""Build hook for the optional compiled stencil kernels.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here downgrades to a pure-Python install
instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "magvisco.kernels._stencils_cy",
                ["src/magvisco/kernels/_stencils.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps results bit-identical to the
                # numpy backend (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"magvisco: skipping compiled kernels ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
