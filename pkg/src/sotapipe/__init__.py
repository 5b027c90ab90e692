"""Corpus construction, prompt generation, and evaluation for leaderboard
(Task, Dataset, Metric, Score) extraction from LaTeX papers."""

__version__ = "0.1.0"
