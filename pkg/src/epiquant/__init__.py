"""Epistemic verification of quantum protocols over stabilizer semantics."""

__version__ = "0.1.0"
