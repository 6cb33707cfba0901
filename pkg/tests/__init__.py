"""Tests for noloco-sim."""
