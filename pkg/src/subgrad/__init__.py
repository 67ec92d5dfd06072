"""Differentiable submodular maximization."""
