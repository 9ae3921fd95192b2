"""
RANKFLOW Services Package

Orchestration of convergence studies.
"""
