"""Gene Ontology term description generation with nested gene/term graph encoders."""

__version__ = "0.1.0"
