"""Regenerates the four experiment figures from quenchlab CSV artifacts.

The scripts read only emitted CSV/JSON files, never the simulation package,
so the two components build and test independently.
"""

__version__ = "0.1.0"
