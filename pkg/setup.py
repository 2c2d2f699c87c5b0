from setuptools import setup


setup(
    name='spinward_mutor',

    version='0.1',

    description='Register-token multi-token prediction lab: numpy transformer, augmentation, tasks and harness',
    long_description=open('README.md', encoding='utf-8').read(),
    long_description_content_type='text/markdown',

    license='BSD-3-Clause',

    packages=['spinward', 'spinward.mutor'],
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'tomli>=1.1; python_version < "3.11"',
        'tqdm>=4.0',
    ],
    entry_points={
        'console_scripts': ['mutor=spinward.mutor.cli:main'],
    },
    zip_safe=False,
)
