"""Reference model runner for the leaderboard-extraction pipeline."""

__version__ = "0.1.0"
