"""Reference adapter for the sartriage tile-detection protocol.

Wraps any object-detection model behind the orchestrator's line-delimited
JSON stdio contract: handshake first, then one response per request, in
request order. Ships a null model and an exact-magenta stub; real model
runtimes plug in through the DetectorModel interface.
"""

from .models import (
    DetectorModel,
    MagentaStubModel,
    ModelLoadError,
    NullModel,
    load_model,
)
from .protocol import AdapterConfig, serve_protocol

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "DetectorModel",
    "MagentaStubModel",
    "ModelLoadError",
    "NullModel",
    "load_model",
    "serve_protocol",
]
