"""Generalized Dyson Brownian motion and its McKean-Vlasov limit: simulation and diagnostics."""

__version__ = "0.1.0"
