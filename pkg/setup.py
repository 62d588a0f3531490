"""Build hook: compiles the optional Cython assembly kernel when Cython and a compiler are available."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("nlop._core", ["src/nlop/_core.pyx"], include_dirs=[numpy.get_include()],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")], optional=True)],
        compiler_directives={"language_level": 3},
        quiet=True,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
