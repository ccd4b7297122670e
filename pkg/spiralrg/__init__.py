"""Wilsonian RG flows of anharmonic-oscillator Hamiltonians in the oscillator basis."""

__version__ = "0.1.0"
