"""
Test package for the wavelet curriculum.
"""
