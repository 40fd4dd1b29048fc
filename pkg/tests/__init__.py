"""AI Journaling Assistant test suite."""
