"""Bundled scenario files, one per study; see scenario-list."""
