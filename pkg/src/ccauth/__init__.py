"""Chuang-Chen multi-server biometric key agreement, modeled as message-driven
state machines, with an adversary harness for its stolen-card weaknesses."""

__version__ = "0.1.0"
