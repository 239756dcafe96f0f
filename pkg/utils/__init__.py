"""
Utility modules shared by the command line and the numerical modules.

This module provides decorators and exceptions.
"""
