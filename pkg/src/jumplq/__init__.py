"""Optimal stabilizing feedback for linear regime-switching jump diffusions."""
