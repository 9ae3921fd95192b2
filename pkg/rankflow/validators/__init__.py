"""
RANKFLOW Validators Package

Model acceptance checks.
"""
