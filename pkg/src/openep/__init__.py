"""Workbench for open-ended future event prediction.

Benchmark construction from news topics with a human verification loop, a
stakeholder-enhanced retrieval/integration/prediction pipeline, and
judge-based evaluation with confidence-weighted scoring.
"""

__version__ = "0.1.0"
