"""Numerics for sharp-interface limits of Ising-Kac and Glauber+Kawasaki dynamics."""

__version__ = "0.1.0"
