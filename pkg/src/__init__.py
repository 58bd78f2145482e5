# Coevolution-based adaptive Monte Carlo localization

__version__ = "0.1.0"
