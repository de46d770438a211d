"""Test suite for the mind-wandering entropy pipeline."""
