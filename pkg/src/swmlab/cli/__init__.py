"""Command-line entry points and experiment configuration."""
