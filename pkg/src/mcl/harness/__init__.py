"""Experiment configs, runners, reports and acceptance criteria."""
