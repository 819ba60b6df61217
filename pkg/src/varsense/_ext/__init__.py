"""Compiled kernels (Cython). Import through :mod:`varsense.kernels`."""
