"""q-adic decoupling laboratory for the parabola."""

__version__ = "0.1.0"
