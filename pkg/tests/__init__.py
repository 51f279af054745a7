"""Tests for the XDD WCET engine."""
