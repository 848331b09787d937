"""Flash threshold logic toolkit."""
__version__ = "0.1.0"
