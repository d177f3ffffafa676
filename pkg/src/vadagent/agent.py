"""Per-window question-driven dialogue between the perception and reasoning models.

The perception model captions the clip; the reasoning model scores the
caption. While the score stays below the confidence threshold and turns
remain, the reasoning model asks one clarifying question, the perception
model answers it from the same frames, and the scene is re-scored with the
answer and retrieved memory context.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .backends import Backends, BackendError, ModelBackend, ModelRequest, complete_with_retry, encode_frames
from .frames import SelectedClip
from .memory import MemoryIndex, count_tokens, format_history, truncate_tokens
from .prompts import FALLBACK_QUESTION, JSON_INSTRUCTION, PromptProfile, load_prompt

log = logging.getLogger(__name__)

BACKEND_ERROR = "backend_error"
PARSE_ERROR = "parse_error"
UNANSWERABLE = "unanswerable"


@dataclass(frozen=True)
class LoopConfig:
    max_turns: int = 2
    threshold: float = 0.7
    enrich_tokens: int = 2048
    caption_tokens: int = 300
    answer_tokens: int = 150
    vlm_max_new_tokens: int = 512
    vlm_temperature: float = 0.7
    llm_max_new_tokens: int = 512
    llm_temperature: float = 0.3

    def violations(self, prefix: str = "loop") -> list[str]:
        out = []
        if self.max_turns < 0:
            out.append(f"{prefix}.max_turns: must be >= 0")
        if not 0 < self.threshold < 1:
            out.append(f"{prefix}.threshold: must lie in (0, 1), got {self.threshold}")
        for name in ("enrich_tokens", "caption_tokens", "answer_tokens", "vlm_max_new_tokens", "llm_max_new_tokens"):
            if getattr(self, name) < 1:
                out.append(f"{prefix}.{name}: must be >= 1")
        for name in ("vlm_temperature", "llm_temperature"):
            if getattr(self, name) < 0:
                out.append(f"{prefix}.{name}: must be >= 0")
        return out


@dataclass(frozen=True)
class Caption:
    text: str
    token_count: int


@dataclass(frozen=True)
class DialogueTurn:
    question: str
    answer: str


@dataclass(frozen=True)
class AgentVerdict:
    flag: int
    probability: float
    reasoning: str
    crime_type: str = "none"
    parse_ok: bool = True


@dataclass
class WindowResult:
    window_start: int
    flag: int
    probability: float
    reasoning: str
    history: list[DialogueTurn] = field(default_factory=list)
    turns_used: int = 0
    crime_type: str = "none"
    caption: str = ""
    frame_indices: list[int] = field(default_factory=list)
    verdicts: list[AgentVerdict] = field(default_factory=list)
    failed: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _fallback(reason: str) -> AgentVerdict:
    return AgentVerdict(0, 0.0, reason, "none", parse_ok=False)


def _first_json_object(raw: str) -> str | None:
    """First balanced ``{...}`` block, ignoring braces inside JSON strings."""
    start = raw.find("{")
    if start < 0:
        return None
    depth = 0
    in_str = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start:i + 1]
    return None


def _as_number(value) -> float:
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        x = float(value.strip())
    else:
        raise ValueError(f"not a number: {value!r}")
    if math.isnan(x):
        raise ValueError("NaN")
    return x


def parse_verdict(raw: str) -> AgentVerdict:
    """Parse a scoring reply. Never raises; malformed input gives a parse_error verdict.

    Any nonzero ``anomaly_score`` counts as anomalous and ``confidence`` is
    clamped to [0, 1]. Text around the JSON object is ignored.
    """
    block = _first_json_object(raw if isinstance(raw, str) else "")
    if block is None:
        return _fallback(PARSE_ERROR)
    try:
        obj = json.loads(block)
        flag = 1 if _as_number(obj["anomaly_score"]) != 0 else 0
        prob = min(1.0, max(0.0, _as_number(obj["confidence"])))
    except (ValueError, KeyError, TypeError):
        return _fallback(PARSE_ERROR)
    reasoning = obj.get("reasoning")
    crime = obj.get("crime_type")
    return AgentVerdict(
        flag,
        prob,
        "" if reasoning is None else str(reasoning),
        "none" if crime in (None, "") else str(crime),
        parse_ok=True,
    )


def enrich(caption: str, history: Sequence[DialogueTurn], ctx: str | None, budget: int) -> str:
    """Caption, retrieved context and Q/A turns under a token budget.

    Over budget, the context is trimmed first, then the oldest turns are
    dropped. The caption is never cut.
    """
    turns = list(history)
    ctx_tokens = ctx.split() if ctx else []

    def build() -> str:
        parts = [caption]
        if ctx_tokens:
            parts.append("Prior observations: " + (ctx if ctx_full else " ".join(ctx_tokens)))
        if turns:
            parts.append(format_history(turns))
        return "\n\n".join(parts)

    ctx_full = True
    text = build()
    over = count_tokens(text) - budget
    if over > 0 and ctx_tokens:
        keep = len(ctx_tokens) - over
        ctx_tokens = ctx_tokens[:keep] if keep > 0 else []
        ctx_full = False
        text = build()
    while count_tokens(text) > budget and turns:
        turns.pop(0)
        text = build()
    return text


def _clip_text(clip: SelectedClip) -> str:
    frames = ", ".join(str(i) for i in clip.indices)
    return f"Frames {frames} of window starting at frame {clip.source_window_start}."


def _vlm_request(clip: SelectedClip, system_prompt: str, cfg: LoopConfig) -> ModelRequest:
    return ModelRequest(
        system_prompt=system_prompt,
        user_text=_clip_text(clip),
        images=tuple(encode_frames(clip.frames)),
        max_new_tokens=cfg.vlm_max_new_tokens,
        temperature=cfg.vlm_temperature,
    )


def initial_caption(clip: SelectedClip, vlm: ModelBackend, cfg: LoopConfig = LoopConfig()) -> Caption:
    """Describe the clip; raises ``BackendError`` once retries are spent."""
    if len(clip) == 0:
        raise ValueError("empty clip")
    reply = complete_with_retry(vlm, _vlm_request(clip, load_prompt("vlm_initial"), cfg))
    text = truncate_tokens(reply, cfg.caption_tokens)
    return Caption(text, count_tokens(text))


def score_scene(
    caption: Caption,
    history: Sequence[DialogueTurn],
    ctx: str | None,
    llm: ModelBackend,
    profile: PromptProfile,
    cfg: LoopConfig = LoopConfig(),
) -> AgentVerdict:
    req = ModelRequest(
        system_prompt=profile.system_prompt,
        user_text=enrich(caption.text, history, ctx, cfg.enrich_tokens) + "\n\n" + JSON_INSTRUCTION,
        max_new_tokens=cfg.llm_max_new_tokens,
        temperature=cfg.llm_temperature,
    )
    try:
        verdict = parse_verdict(complete_with_retry(llm, req))
        if not verdict.parse_ok:
            log.info("unparseable verdict; asking again")
            verdict = parse_verdict(complete_with_retry(llm, req))
    except BackendError as exc:
        log.warning("scoring failed: %s", exc)
        return _fallback(BACKEND_ERROR)
    return verdict


def generate_question(
    caption: Caption,
    history: Sequence[DialogueTurn],
    verdict: AgentVerdict,
    llm: ModelBackend,
    cfg: LoopConfig = LoopConfig(),
) -> str:
    parts = [f"Video description:\n{caption.text}"]
    if history:
        parts.append("Questions asked so far:\n" + format_history(history))
    parts.append(
        f"Current assessment: anomaly_score={verdict.flag}, confidence={verdict.probability}\n"
        f"Reasoning: {verdict.reasoning}"
    )
    req = ModelRequest(
        system_prompt=load_prompt("question"),
        user_text="\n\n".join(parts),
        max_new_tokens=cfg.llm_max_new_tokens,
        temperature=cfg.llm_temperature,
    )
    try:
        reply = complete_with_retry(llm, req)
    except BackendError as exc:
        log.warning("question generation failed: %s", exc)
        reply = ""
    for line in reply.splitlines():
        if line.strip():
            return line.strip()
    return FALLBACK_QUESTION


def answer_question(clip: SelectedClip, question: str, vlm: ModelBackend, cfg: LoopConfig = LoopConfig()) -> str:
    if not question.strip():
        raise ValueError("empty question")
    prompt = load_prompt("vlm_focused").replace("{question}", question)
    try:
        reply = complete_with_retry(vlm, _vlm_request(clip, prompt, cfg))
    except BackendError as exc:
        log.warning("answer failed: %s", exc)
        return UNANSWERABLE
    answer = truncate_tokens(reply, cfg.answer_tokens)
    return answer or UNANSWERABLE


def run_window(
    clip: SelectedClip,
    memory: MemoryIndex,
    cfg: LoopConfig,
    backends: Backends,
    profile: PromptProfile,
) -> WindowResult:
    """Caption, score, and question the clip until confident or out of turns."""
    result = WindowResult(clip.source_window_start, 0, 0.0, BACKEND_ERROR, frame_indices=clip.indices)
    try:
        caption = initial_caption(clip, backends.vlm, cfg)
    except BackendError as exc:
        log.warning("window %d: caption failed: %s", clip.source_window_start, exc)
        result.failed = True
        return result
    result.caption = caption.text

    history: list[DialogueTurn] = []
    verdict = score_scene(caption, history, None, backends.llm, profile, cfg)
    verdicts = [verdict]
    last_ctx = None
    k = 0
    while k < cfg.max_turns and verdict.probability < cfg.threshold:
        question = generate_question(caption, history, verdict, backends.llm, cfg)
        ctx = memory.retrieve_context(question)
        if ctx:
            last_ctx = ctx
        answer = answer_question(clip, question, backends.vlm, cfg)
        history.append(DialogueTurn(question, answer))
        verdict = score_scene(caption, history, ctx, backends.llm, profile, cfg)
        verdicts.append(verdict)
        k += 1

    if caption.text.strip():
        memory.add_scene(caption.text, verdict.flag, history, last_ctx)
    result.flag = verdict.flag
    result.probability = verdict.probability
    result.reasoning = verdict.reasoning
    result.crime_type = verdict.crime_type
    result.history = history
    result.turns_used = k
    result.verdicts = verdicts
    return result
