"""Boson bunching with partially distinguishable photons.

Exact permanents, distinguishability (Gram) matrices, bunching and event
probabilities in linear interferometers, and drivers for the experiments in
which a polarisation pattern out-bunches fully indistinguishable photons.
"""

__version__ = "0.1.0"
