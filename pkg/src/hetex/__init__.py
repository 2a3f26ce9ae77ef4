"""Heterogeneous two-UAV frontier exploration with greedy and min-cost-flow allocation."""

__version__ = "0.1.0"
