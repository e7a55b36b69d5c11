"""Tests for :mod:`percolab`."""
