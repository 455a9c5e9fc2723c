"""Exact computer-algebra engine for formal group laws, multiplicative
characteristic classes, and symplectic loop-space residue calculus."""

__version__ = "0.1.0"
