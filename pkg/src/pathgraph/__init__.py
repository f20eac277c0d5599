"""Design post-selected photonic experiments as colored multigraphs."""

__version__ = "0.1.0"
