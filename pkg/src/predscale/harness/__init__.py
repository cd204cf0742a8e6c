"""Scenario runner, reports and command line."""
