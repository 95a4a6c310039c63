"""Delegation between error-prone navigating agents, learned by an IBL manager."""

__version__ = "0.1.0"
