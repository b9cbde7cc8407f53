"""Numerical laboratory for Shilnikov BVPs, the Morse-Smale flow on U(n) and odd Chern-Weil forms."""

__version__ = "0.1.0"
