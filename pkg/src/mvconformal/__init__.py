"""Multi-view conformal classification toolkit.

Wraps score-producing classifiers into split-conformal predictors, fuses
heterogeneous sensor views (feature aggregation, stacking, set intersection),
and evaluates prediction sets with conformal and classical measures through a
reproducible experiment harness.
"""

__version__ = "0.1.0"
