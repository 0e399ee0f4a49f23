"""Tests for magwill."""
