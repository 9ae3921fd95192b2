"""
RANKFLOW Utilities Package
"""
