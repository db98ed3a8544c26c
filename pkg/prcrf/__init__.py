"""PRC classification trees, PRC random forests and the Autoencoder-PRC-RF ensemble."""

__version__ = "0.1.0"
