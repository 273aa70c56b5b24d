from setuptools import setup

setup(
    name="lattice-leakage-control",
    version="0.1.0",
    py_modules=[
        "analytic_models",
        "console",
        "errors",
        "experiments",
        "lattice_model",
        "measurement",
        "output_writer",
        "propagator",
        "run",
        "run_config",
        "spectral_grid",
        "stationary_states",
    ],
    install_requires=[
        "python-dotenv",
        "pydantic>=2",
        "numpy",
        "scipy>=1.9",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["leakctl=run:main"]},
    author="angrysky56",
    description="Simulator for PM/AM interference control of leakage in a tilted optical-lattice qubit",
    keywords="optical lattice, split-operator, wannier-stark, leakage, qubit",
    python_requires=">=3.8",
)
