"""Tracking objects around a corner from wall intensity images."""
