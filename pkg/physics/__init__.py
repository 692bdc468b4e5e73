"""Numerical core: geometry, single-layer BEM, capacitance, asymptotics, oracle and modes."""
