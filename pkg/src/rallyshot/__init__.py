"""Desk-scale badminton shot recognition toolkit.

Detections and keypoints come from any upstream detector as files; this
package supplies everything after that: court geometry, identity-preserving
tracking, pose normalization, the skeleton-sequence encoder with contrastive
pretraining, transformer shot classification, doubles inference, simulation,
and evaluation.
"""

__version__ = "0.1.0"
