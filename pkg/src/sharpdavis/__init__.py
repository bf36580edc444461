"""Numerical certification of sharp weighted Davis inequalities for martingales
on finite filtered probability spaces."""

__version__ = "0.1.0"
