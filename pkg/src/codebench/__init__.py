"""Offline harness for comparing generated and community judge solutions.

The package is organized around a small set of stages: corpus ingestion,
snippet extraction, language detection, import repair, solution generation,
judging, static analysis, and nonparametric statistics.  Each stage is usable
on its own; ``codebench.pipeline`` wires them together behind the CLI.
"""

__version__ = "0.1.0"
