from setuptools import setup

setup(
    name='glebench',
    version='0.1.0',
    packages=['tests', 'glebench'],
    url='',
    license='MIT',
    author='',
    author_email='',
    description='Simulation and verification bench for the Markovian GLE with power-law memory',

    install_requires=[
        "pandas>=1.5.0",
        "pandera>=0.13.0",
        "pyyaml>=5.4.1",
        "scikit-learn>=0.24.1",
        "numpy>=1.21.0",
        "scipy>=1.9.0",
        "matplotlib>=3.3.4"
    ],
    extras_require={
        "dev": ["pytest>=6.2.1",
                "sphinx>=3.4.0",
                "sphinx-rtd-theme>=0.5.0",
                "tox>=3.22.0"]
    },
    entry_points={
        "console_scripts": ["glebench=glebench.cli:main"]
    }
)
