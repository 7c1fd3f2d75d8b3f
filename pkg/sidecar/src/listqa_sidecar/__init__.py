"""HTTP inference service for the listqa remote gateway.

Wraps summarization, entity tagging, question generation, and extractive
span scoring behind a small JSON protocol. Two engines: "hf" loads
pretrained checkpoints via transformers, "lite" is a deterministic
dependency-free stand-in for development and testing.
"""

__version__ = "0.1.0"
