"""Jafun: parser, checker and frame-stack interpreters for a small Java-like language."""

__version__ = "0.1.0"
