from setuptools import setup, find_packages

setup(
    name="stdg",
    version="0.1",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'meshio',
        'psutil',
        'rich',
    ],
    entry_points={
        'console_scripts': ['stdg=stdg.main:main'],
    },
)  # 基础依赖
