from setuptools import find_packages, setup

setup(
    name="mf_bpinn",
    version="0.1",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    py_modules=["config", "errors", "run_experiment"],
    include_package_data=True,
)
