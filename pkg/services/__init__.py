"""
Service layer for file I/O.

This module keeps PNG, manifest and CSV handling apart from the
numerical modules.
"""
