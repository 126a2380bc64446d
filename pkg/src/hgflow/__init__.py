"""Numerical laboratory for the hyperbolic geometric flow on conformally flat surfaces."""
