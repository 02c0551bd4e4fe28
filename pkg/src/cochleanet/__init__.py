"""Event-based auditory feature extraction with local and cross time vectors."""

from .events import CrossEvent, LocalEvent, RawEvent, RawStream, Recording
from .network import NetworkModel, load_model, process_recording, save_model

__all__ = ["RawEvent", "LocalEvent", "CrossEvent", "RawStream", "Recording",
           "NetworkModel", "load_model", "save_model", "process_recording"]
__version__ = "0.1.0"
