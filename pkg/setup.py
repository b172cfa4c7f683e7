"""Build script: compiles the optional special-function kernel extension.

The package works without the extension (a vectorized numpy fallback is
selected at import time), so the extension is marked optional and any
compile failure degrades gracefully to the pure-Python build.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "auxue.diffkit._special_cy",
        ["src/auxue/diffkit/_special_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    )
    ext.optional = True
    ext_modules = cythonize([ext], language_level="3")
except ImportError:
    pass

setup(ext_modules=ext_modules)
