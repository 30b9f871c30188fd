"""Recursive Datalog with min/max aggregates in recursion, evaluated sequentially
or on a simulated multi-worker cluster under BSP and SSP synchronization."""

__version__ = "0.1.0"
