"""Pretrained forecaster parameters."""
