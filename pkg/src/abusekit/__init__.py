"""Multimodal abusive-speech detection toolkit.

Pipeline: manifest-driven audio ingestion, acoustic emotion features,
precomputed audio/text embeddings, z-score + PCA fusion, MLP and
stacked-ensemble classifiers, a two-stage text baseline, and the
per-language evaluation/ablation protocol with t-SNE analysis.
"""

__version__ = "0.1.0"
