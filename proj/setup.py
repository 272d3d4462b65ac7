from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "_bingan",
    sources=[
        "python/bingan_module.cpp",
        "src/mnist.cpp",
        "src/image.cpp",
        "src/checkpoint.cpp",
        "src/harness.cpp",
    ],
    include_dirs=["include", "vendor"],
    libraries=["z"],
    cxx_std=20,
    extra_compile_args=["-O3"],
)

setup(
    name="bingan",
    version="0.1.0",
    description="Adversarial training with binary output neurons",
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
    python_requires=">=3.9",
)
