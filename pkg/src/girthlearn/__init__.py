"""Structure learning for latent Ising models on girth-constrained graphs."""
__version__ = "0.1.0"
