"""Trajectory analytics: where people select, how they use color, and
what shapes their selections trace (selection, color, intention)."""
