#!/usr/bin/env python
from setuptools import setup, find_packages


def parse_requirements(path, section='# --- PyPI packages ---'):
    """
    Pinned requirements of one block of requirements.txt
    """
    reqs = []
    inside = False

    with open(path) as stream:
        for line in stream:
            line = line.strip()

            if line.startswith('# ---'):
                inside = line == section
                continue

            if inside and line and not line.startswith('#'):
                reqs.append(line)

    return reqs


packages = find_packages(
    exclude=[
        '*.tests', '*.tests.*', 'tests.*', 'tests',
        '*.test', '*.test.*', 'test.*', 'test',
    ]
)

setup(
    name='conformal-od',
    version='0.1',
    description='Conformal prediction and risk control for object detection',
    packages=packages,
    install_requires=parse_requirements('requirements.txt'),
    python_requires='>=3.8',
    entry_points={
        'console_scripts': ['conformod=conformod.cli:main'],
    },
    package_data={'': ['*.txt', '*.json', '*.csv']},
)
