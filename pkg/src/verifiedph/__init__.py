"""Verified sublevel-set persistence for smooth functions on the unit cube."""
