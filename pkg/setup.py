#!/usr/bin/env python

from setuptools import setup

setup(
    name='shearstrip',

    description='Numerical checks of heat semigroup decay rates in sheared '
                'and straight strips.',

    version='0.1.0',

    author='The shearstrip Developers',

    packages=[
        'shearstrip',
        'shearstrip.apps',
        'shearstrip.report',
    ],
    python_requires='>=3.8',
    install_requires=[
        'numpy',
        'scipy>=1.12',
        'pyrocko',
        'pyyaml',
    ],
    entry_points={
        'console_scripts': [
            'shearstrip = shearstrip.apps.shearstrip:main',
        ]
    },
    package_dir={'shearstrip': 'src'},

    data_files=[],

    license='GPLv3',

    classifiers=[
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: Implementation :: CPython',
        'Operating System :: POSIX',
        'Operating System :: MacOS',
        'Topic :: Scientific/Engineering',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Scientific/Engineering :: Physics',
        ],

    keywords=[
        'heat equation, spectral theory, Hardy inequality, finite differences,'
        ' eigenvalue problems'],
    )
