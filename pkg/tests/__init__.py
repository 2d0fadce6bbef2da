"""
dkmpc Test Suite

Tests for the dkmpc pipeline components.
"""
