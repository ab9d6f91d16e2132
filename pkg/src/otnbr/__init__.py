"""Relay network code design for orthogonal two-hop networks with a broadcasting relay."""
__version__ = "0.1.0"
