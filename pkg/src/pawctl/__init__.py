"""Gesture-driven quadruped control bridge with curriculum-trained expressive gestures."""

__version__ = "0.1.0"
