"""
RANKFLOW Harness Package

Distances between finite-N runs and the limit.
"""
