"""Drone-imagery triage pipeline for wilderness search and rescue.

Stages: corpus ingest with video frame sampling, unsupervised spectral
anomaly screening, tiled detection with a pluggable backend, detection
evaluation, training-crop preparation, and a human review service.
"""

__version__ = "0.1.0"
