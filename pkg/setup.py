from setuptools import setup


VERSION = '0.1'


if __name__ == '__main__':
    setup(name='pyrpix',
          version=VERSION,
          packages=[
              'pyrpix',
              'pyrpix.commands',
              'pyrpix.tests'
          ],
          entry_points={
              'console_scripts': [
                  'pyrpix = pyrpix.tool:main'
              ]
          },
          package_data={
              'pyrpix': [
                  'py.typed'
              ]
          },
          python_requires='>=3.8',
          install_requires=[
              'colorama==0.4.6',
              'Jinja2==3.1.2',
              'mypy-extensions==1.0.0',
              'numpy==1.24.4',
              'Pillow==10.0.1',
              'tabulate==0.9.0'
          ],
          description='Autoregressive image models with auxiliary variables',
          # pylint: disable=line-too-long
          long_description='Pyrpix trains, samples and evaluates PixelCNN-style image models factorized through a 4-bit grayscale view or a resolution pyramid',
          license='BSD',
          platforms='UNIX',
          classifiers=[
              'Development Status :: 3 - Alpha',
              'Environment :: Console',
              'Intended Audience :: Science/Research',
              'License :: OSI Approved :: BSD License',
              'Operating System :: POSIX :: Linux',
              'Programming Language :: Python :: 3.8',
              'Programming Language :: Python :: 3.9',
              'Programming Language :: Python :: 3.10',
              'Programming Language :: Python :: Implementation :: CPython',
              'Topic :: Scientific/Engineering :: Artificial Intelligence',
              'Topic :: Scientific/Engineering :: Image Processing'
          ])
