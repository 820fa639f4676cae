"""Covering codes for point patterns."""
