"""Power-quality disturbance synthesis, sparse representation and classification"""

__version__ = "0.1.0"
