"""Advisor-based ensemble learning with diversity-biased online reweighting."""

__version__ = "0.1.0"
