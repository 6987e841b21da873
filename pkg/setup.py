from setuptools import setup, find_packages

setup(
    name='normalizer',
    version='0.1.0',
    packages=find_packages(include=['normalizer', 'normalizer.*']),
    package_data={'normalizer.models': ['*.toml', '*.psx']},
    python_requires='>=3.10',
	install_requires=['scikit-learn', 'numpy', 'scipy', 'matplotlib', 'pandas', 'numba', 'pydantic>=2', "tomli; python_version < '3.11'"],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['normalizer=normalizer.cli.main:main']}
)
