"""Command line, experiments and reports."""
