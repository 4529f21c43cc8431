"""Topic modeling for long conversational transcripts.

Pipeline: ingest -> embed -> reduce (UMAP) -> cluster (HDBSCAN) -> topics
(c-TF-IDF keywords) -> label -> analyze (soft topic distributions).
"""

__version__ = "0.1.0"
