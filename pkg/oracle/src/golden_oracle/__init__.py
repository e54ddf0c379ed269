"""Golden-vector generator: independent reference implementations of the
acoustic feature formulas, plus deterministic fixture audio synthesis.

This package is a one-shot tool. Its outputs (fixture WAVs, .f32 golden
arrays, manifest.json) are committed to the consuming repository; nothing
here runs at that repository's test time, and nothing here imports it.
"""

__version__ = "0.1.0"
