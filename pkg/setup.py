from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    extensions = []
else:
    # optional=True: if the compiler is unavailable the install still succeeds
    # and hcrf falls back to the pure-Python kernels.
    extensions = cythonize(
        [
            Extension(
                "hcrf._kernels._native",
                ["src/hcrf/_kernels/_native.pyx"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
