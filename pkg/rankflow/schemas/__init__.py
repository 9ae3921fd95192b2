"""
RANKFLOW Schemas Package

Pydantic models for experiment configuration and convergence reports.
"""
