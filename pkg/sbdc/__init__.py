"""
Secure-by-design consensus toolkit: objective coding, tampering certificates
and consensus simulation.
"""

__version__ = "0.1.0"
