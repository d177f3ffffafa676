"""Training-free video anomaly detection through question-driven VLM/LLM dialogue."""

from .agent import AgentVerdict, DialogueTurn, LoopConfig, WindowResult, parse_verdict, run_window
from .backends import BackendConfig, BackendError, BackendTimeout, HttpBackend, ModelRequest, ScriptedBackend
from .config import EngineConfig, load_config
from .frames import Frame, MotionConfig, SelectedClip, Window, select_clip, slide_windows
from .memory import HashingEmbedder, MemoryConfig, MemoryIndex
from .metrics import average_precision, roc_auc
from .pipeline import read_manifest, run_dataset
from .postprocess import PostConfig, final_scores

__all__ = [
    "AgentVerdict", "DialogueTurn", "LoopConfig", "WindowResult", "parse_verdict", "run_window",
    "BackendConfig", "BackendError", "BackendTimeout", "HttpBackend", "ModelRequest", "ScriptedBackend",
    "EngineConfig", "load_config",
    "Frame", "MotionConfig", "SelectedClip", "Window", "select_clip", "slide_windows",
    "HashingEmbedder", "MemoryConfig", "MemoryIndex",
    "average_precision", "roc_auc",
    "read_manifest", "run_dataset",
    "PostConfig", "final_scores",
]
