"""Continuous knowledge metabolism pipeline.

Ingests a time-stamped paper corpus per research topic, evolves a
size-capped markdown knowledge base across sliding calendar windows,
generates structured hypotheses from the evolving state, and evaluates
them against strictly-future papers with a metrics and statistics suite.
"""

__version__ = "0.1.0"
