"""Graph-structured LP modelling toolkit for remote renewable supply chains."""

__version__ = "0.1.0"
