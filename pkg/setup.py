import os

from setuptools import setup

# name: this is the name of the distribution.

version_path = os.path.join(os.path.abspath(os.path.dirname(__file__)),
                            'fairrank', 'version.py')
with open(version_path) as fp:
    exec(fp.read())

setup(name='fairrank',
      version=str(__version__),
      packages=['fairrank',
                ],
      description='Fair learning to rank under inferred protected attributes',
      python_requires='>=3.8',
      install_requires=['numpy', 'scipy', 'pandas'],
      extras_require={'test': ['pytest', 'hypothesis']},
      entry_points={'console_scripts': ['fairrank=fairrank.cli:main']},
      include_package_data=True)
