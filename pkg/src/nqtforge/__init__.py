"""Question -> natural-query-triple translation, correction and SPARQL answering."""

__version__ = "0.1.0"
