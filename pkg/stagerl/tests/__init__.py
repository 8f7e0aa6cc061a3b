"""Tests for stagerl package."""
