"""Structured policy graphs for behavior cloning on small control tasks."""

__version__ = "0.1.0"
