"""Toolkit for generating list-question answering datasets from unlabeled text.

Turns a passage corpus into (context, question, multi-span answers) records by
summarizing passages, grouping same-type entities as candidate answers,
generating questions, and refining the answer sets with a span-scoring model.
Also ships the matching exact/partial multi-span evaluation metrics.
"""

__version__ = "0.1.0"
