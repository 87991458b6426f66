"""tokloc: localize the first hallucinated token in LLM-generated code.

The pipeline normalizes generated programs (alpha-renaming user-defined
identifiers), compares them against pools of canonical solutions under a
per-language whitespace policy, maps the first mismatching character back to
the generating LLM's token stream, and trains lightweight predictors that
forecast that token index from generation-time signals.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
FEATURE_LAYOUT_VERSION = 1
MODEL_FORMAT_VERSION = 1
