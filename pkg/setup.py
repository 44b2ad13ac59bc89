# -*- coding: utf-8 -*-

import os
import subprocess  # nosec
import sys

from setuptools import find_packages, setup

os.chdir(os.path.dirname(os.path.realpath(__file__)))

with open('README.md', 'r', encoding='utf-8') as f:
    long_description = f.read()

version = subprocess.check_output([sys.executable,  # nosec
                                   os.path.join('scripts', 'find_version.py')],
                                  universal_newlines=True).strip()

setup(
    name='qrlfolio',
    version=version,
    description='Quantum and classical reinforcement learning for dynamic portfolio optimization.',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Financial and Insurance Industry',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3 :: Only',
        'Topic :: Office/Business :: Financial :: Investment',
        'Topic :: Scientific/Engineering :: Physics',
        'Typing :: Typed',
    ],
    keywords=['portfolio optimization', 'reinforcement learning', 'variational quantum circuits'],
    packages=find_packages(exclude=['tests', 'tests.*']),
    python_requires='>=3.7',
    install_requires=[
        'numpy>=1.21',              # statevectors and linear algebra
        'pandas>=1.5',              # price files and result tables
        'tbtrim>=0.2.1',            # traceback trim support
        'bpc-utils~=0.10.0',        # option parsing, task pool and config namespace
        'typing_extensions',        # Literal on Python 3.7
    ],
    extras_require={
        'lint': [
            'flake8',
            'pylint',
            'mypy',
            'bandit>=1.6.3',
            'vermin>=1.1.0',
            'colorlabels>=0.7.0',
        ],
        'test': [
            'pytest>=6.2.0',
            'pytest-doctestplus>=0.5.0',
            'hypothesis>=6.0',
            'coverage',
        ],
        'docs': [
            'Sphinx',
            'sphinx-autodoc-typehints',
            'sphinxemoji',
        ],
    },
    entry_points={
        'console_scripts': [
            'qrlfolio = qrlfolio.cli:main',
        ]
    },
)
