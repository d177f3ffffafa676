"""Prompt texts and per-dataset scoring profiles."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

# reply schema the scoring model is asked to follow; repeated in every scoring
# request because only the UCF system prompt spells it out
JSON_INSTRUCTION = (
    'Respond ONLY in JSON format:\n'
    '{"anomaly_score": 0|1, "confidence": 0.0-1.0, "reasoning": "...", "crime_type": "..."}'
)

FALLBACK_QUESTION = "What specific actions are the people performing?"


def load_prompt(name: str) -> str:
    """Read a bundled prompt file (``prompts/<name>.txt``) byte-exactly."""
    return resources.files("vadagent").joinpath("prompts", f"{name}.txt").read_bytes().decode("utf-8")


@dataclass(frozen=True)
class PromptProfile:
    id: str
    system_prompt: str
    taxonomy_label: str


_PROFILE_FILES = {
    "ucf": ("score_ucf", "UCF-Crime"),
    "xd": ("score_xd", "XD-Violence"),
    "ubnormal": ("score_ubnormal", "UBnormal"),
    "complexvad": ("score_complexvad", "ComplexVAD"),
}

PROFILE_IDS = tuple(_PROFILE_FILES)


def get_profile(profile_id: str, prompt_file: str | Path | None = None) -> PromptProfile:
    """Built-in profile by id; ``prompt_file`` swaps in a custom scoring prompt."""
    if profile_id not in _PROFILE_FILES:
        raise KeyError(f"unknown prompt profile {profile_id!r}; choose from {', '.join(PROFILE_IDS)}")
    name, label = _PROFILE_FILES[profile_id]
    text = Path(prompt_file).read_bytes().decode("utf-8") if prompt_file else load_prompt(name)
    return PromptProfile(profile_id, text, label)
