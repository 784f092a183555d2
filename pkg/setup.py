from setuptools import find_packages, setup

setup(
    name="modjoint",
    version="0.1.0",
    url="http://github.com/modjoint/modjoint",
    license="ISCL",
    description=(
        "Joint pricing and dispatch of exclusive and shared rides in a "
        "mobility-on-demand simulator."
    ),
    long_description=open("README.rst", "r").read(),
    author="ModJoint Developers",
    packages=find_packages(exclude=["tests", "tests.*"]),
    include_package_data=True,
    python_requires=">=3.8",
    install_requires=[
        "click",
        "networkx",
        "numpy",
        "pandas",
        "PyYAML",
        "scikit-learn",
        "scipy",
    ],
    extras_require={
        "dev": [
            "black==22.3.0",
            "bumpversion",
            "coverage",
            "flake8",
            "isort",
            "pytest",
            "pytest-cov",
            "radon[flake8]",
            "tox",
        ]
    },
    entry_points={"console_scripts": ["modjoint=modjoint.cli:modjoint"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "License :: OSI Approved :: ISC License (ISCL)",
        "Operating System :: POSIX",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
