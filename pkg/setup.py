"""Install the program."""
from setuptools import setup

setup(
    name='fibrosis-risk-toolkit',
    version='1.0.0',
    description='Radiomics and CNN fibrosis prediction exercised on synthetic CT phantoms',
    author='Fibrosis-Risk-Toolkit contributors',
    author_email='',
    url='',
    packages=['ui', 'core'],
    install_requires=['numpy', 'scipy', 'PyYAML'],
    extras_require={'test': ['pytest']},
    scripts=['fibrosis-risk'],
    include_package_data=True)
