"""Orthogonally precoded OFDM over doubly-selective channels.

Precoding bases (DSFT, Walsh-Hadamard, 2-D DPS), an iterative receiver with
soft parallel interference cancellation, iterative Wiener channel estimation,
channel-hardening analysis and a Monte-Carlo BER harness.
"""

__version__ = "0.1.0"
