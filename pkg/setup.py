from setuptools import setup, find_packages

setup(
    name="geoshift-validation",
    version="0.1.0",
    packages=find_packages(include=["src", "src.*"]),
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.23.0",
        "scipy>=1.9.0",
        "pandas>=1.5.0",
        "scikit-learn>=1.2.0",
        "pydantic>=2.3.0",
        "pydantic-settings>=2.1.0",
        "loguru>=0.7.0",
        "prometheus-client>=0.17.0",
        "python-dotenv>=1.1.0",
    ],
    entry_points={
        "console_scripts": [
            "geoshift=src.main:main",
        ],
    },
)
