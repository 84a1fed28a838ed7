from setuptools import setup, find_packages

setup(
    name='dichromatic_sps',
    version='0.1.0',
    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    entry_points={
        'console_scripts': [
            'dichromatic_sps=app.main:main'
        ],
        # Dynamics plugins - master-equation backends for the emitter-phonon model
        'dynamics.plugins': [
            'unitary=plugins_dynamics.unitary_dynamics:UnitaryDynamics',
            'weak_coupling=plugins_dynamics.weak_coupling_dynamics:WeakCouplingDynamics',
            'polaron=plugins_dynamics.polaron_dynamics:PolaronDynamics'
        ]
    },
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'tqdm'
    ],
    python_requires='>=3.9',
    author='Harvey Bastidas',
    author_email='your.email@example.com',
    description=(
        'Simulator for dichromatic excitation of phonon-coupled quantum-dot single-photon sources, '
        'with pluggable master-equation backends, pulse-area sweeps and cavity figures of merit.'
    )
)
