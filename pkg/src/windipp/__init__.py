"""Wind-aware informative path planning for multiple UAVs.

Stages: task placement by mutual information (:mod:`placement`), wind-aware
FMT* cost matrix (:mod:`planner`), min-max multi-depot routing
(:mod:`routing`) and Dubins mission simulation with GP mapping
(:mod:`mission`). :mod:`pipeline` and :mod:`cli` chain them.
"""

__version__ = "0.1.0"
