"""cryptoscan: backward IFDS detection of cryptographic API misuse in CIR programs."""

__version__ = "0.1.0"
