"""Disaster mapping from multi-temporal rasters.

Two stages: space granulation produces a binary disaster mask (internally
via unsupervised change detection, or by ingesting a mask from an external
model), and attribute granulation turns the mask into a georeferenced
database of disaster regions.
"""

__version__ = "0.1.0"
