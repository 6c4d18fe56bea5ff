"""Tableau-based inconsistency handling for relational instances.

Detects constraint violations with an analytic tableau whose closure rules
look inside the stored instance, repairs the instance by opening the closed
tableau minimally, and answers queries so that only facts true in every
repair count. A brute-force oracle cross-checks each stage.
"""

__version__ = "0.1.0"
