"""Laser-kicked He2* rotational coherence in superfluid helium: simulation and fits."""

__version__ = "0.1.0"
