from setuptools import setup

version = "0.1.0"

def readme():
    with open("README.rst") as f:
        return f.read()

setup(name="ctstress",
      description="Low-dose portable-CT corruption and evaluation harness",
      long_description=readme(),
      version = version,
      license = "GPLv3",
      packages = ["ctstress"],
      package_data = {
            '': ['*.toml'],
      },
      install_requires = [
            "toml>=0.9.0",
            "numpy>=1.22",
            "scipy>=1.8",
            "Pillow>=9.0",
            "scikit-image>=0.19",
            "scikit-learn>=1.0",
            "matplotlib>=3.5",
            "pandas>=1.5",
      ],
      entry_points = {
            'console_scripts': ['ctstress = ctstress:main'],
      },
      classifiers=[
            'Intended Audience :: Science/Research',
            'Topic :: Scientific/Engineering :: Medical Science Apps.',
            'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
            # Python versions supported.
            'Programming Language :: Python :: 3 :: Only',
            'Programming Language :: Python :: 3',
            'Programming Language :: Python :: 3.8',
            'Programming Language :: Python :: 3.9',
            'Programming Language :: Python :: 3.10',
            'Programming Language :: Python :: 3.11',
        ],
      include_package_data = True,
)
