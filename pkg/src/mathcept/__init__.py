"""Workbench for extracting and curating mathematical concepts.

Provides corpus ingestion, prompt construction for language-model
extraction, response parsing, normalization rules, inter-annotator
agreement statistics, an adjudication store, an HTTP service, and a CLI.
"""

__version__ = "0.1.0"
