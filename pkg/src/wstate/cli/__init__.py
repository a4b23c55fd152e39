"""Command-line interface and scenario files."""
