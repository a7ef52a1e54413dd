from setuptools import find_packages, setup

setup(
    name='aircomp',
    version='0.0.1',
    description='Optimized transmit sequences for l_p-norm computation over a multiple-access channel',
    packages=find_packages(exclude=['tests']),
    entry_points={
        'console_scripts': ['aircomp-sweep=aircomp.sweep.sweep:main'],
    },
)
