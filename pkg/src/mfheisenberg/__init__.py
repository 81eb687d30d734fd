"""Mean-field classical Heisenberg model: analytics, Gibbs sampling and limit-theorem diagnostics."""

__version__ = "0.1.0"
