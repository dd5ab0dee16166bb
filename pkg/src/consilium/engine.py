"""Single-role baseline and the tester/developer discussion protocol.

A round is one tester turn followed by one developer turn. The opening
exchange (tester's first judgment, developer's first reaction to it) is round
1. After every developer turn the latest verdicts are compared; equal
verdicts end the discussion, otherwise it continues until ``max_depth``
rounds have been played. The tester's latest judgment is the final one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .backend import ChatBackend, ChatRequest, ChatResponse
from .core import Approach, CodeSegment, DiscussionTranscript, Judgment, Role, RunConfig, Stage, Turn
from .parser import ParseOutcome, ParseRule, parse_judgment
from .prompting import FORMAT_REMINDER, PromptTemplate, RenderedPrompt, render_discussion, render_initial


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscussionState:
    max_depth: int = 5
    stage: Stage = Stage.INITIALIZATION
    round: int = 1
    tester_last: Judgment | None = None
    developer_last: Judgment | None = None
    consensus: bool = False
    history: tuple[Turn, ...] = field(default_factory=tuple)

    def last(self, role: Role) -> Judgment | None:
        return self.tester_last if role is Role.TESTER else self.developer_last


def step(
    state: DiscussionState,
    incoming: ParseOutcome,
    role: Role,
    *,
    raw_text: str = "",
    prompt_tokens: int = 0,
    completion_tokens: int = 0,
    usage_estimated: bool = False,
) -> DiscussionState:
    """Record one reply and advance the protocol.

    A failed parse is recorded as a turn without a judgment and changes
    nothing else; the caller decides whether to retry, carry forward, or
    :func:`finish`.
    """
    if state.stage is Stage.CONCLUSION:
        raise ProtocolError("step() called after the discussion concluded")
    turn = Turn(
        index=len(state.history),
        role=role,
        stage=state.stage,
        raw_text=raw_text,
        judgment=incoming.judgment,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        usage_estimated=usage_estimated,
    )
    state = replace(state, history=state.history + (turn,))
    judgment = incoming.judgment
    if judgment is None:
        return state
    if role is Role.TESTER:
        return replace(state, tester_last=judgment)

    if state.tester_last is None:
        raise ProtocolError("developer judged before any tester judgment")
    state = replace(state, developer_last=judgment)
    if state.tester_last.verdict == judgment.verdict:
        return replace(state, stage=Stage.CONCLUSION, consensus=True)
    if state.round >= state.max_depth:
        return replace(state, stage=Stage.CONCLUSION, consensus=False)
    return replace(state, stage=Stage.DISCUSSION, round=state.round + 1)


def finish(state: DiscussionState) -> DiscussionState:
    """Conclude early without consensus (a role stayed unparseable)."""
    if state.stage is Stage.CONCLUSION:
        return state
    return replace(state, stage=Stage.CONCLUSION, consensus=False)


def replay(transcript: DiscussionTranscript, max_depth: int) -> DiscussionState:
    """Feed a stored transcript back through :func:`step`."""
    state = DiscussionState(max_depth=max_depth)
    for turn in transcript.turns:
        if state.stage is Stage.CONCLUSION:
            raise ProtocolError(f"turn {turn.index} recorded after the discussion concluded")
        outcome = ParseOutcome(turn.judgment, ParseRule.FAILED if turn.judgment is None else ParseRule.STRICT_HEADER)
        state = step(state, outcome, turn.role, raw_text=turn.raw_text,
                     prompt_tokens=turn.prompt_tokens, completion_tokens=turn.completion_tokens,
                     usage_estimated=turn.usage_estimated)
    return finish(state)


class _Speaker:
    """One role's isolated message history within a single discussion."""

    def __init__(self, role: Role, config: RunConfig, backend: ChatBackend):
        self.role = role
        self.config = config
        self.backend = backend
        self.messages: list[tuple[str, str]] = []

    def ask(self, prompt: RenderedPrompt, user_text: str | None = None) -> ChatResponse:
        self.messages.append(("user", user_text or prompt.user_text))
        request = ChatRequest(
            model_name=self.config.model_name,
            system_text=prompt.system_text,
            user_messages=tuple(self.messages),
            max_tokens=self.config.max_response_tokens,
            temperature=self.config.temperature,
        )
        response = self.backend.complete(request)
        self.messages.append(("assistant", response.text))
        return response


def _speak(state: DiscussionState, speaker: _Speaker, prompt: RenderedPrompt) -> tuple[DiscussionState, bool]:
    """Ask, re-asking with a format reminder on unparseable replies. Returns (state, parsed)."""
    text = None
    for _ in range(speaker.config.parse_retries + 1):
        response = speaker.ask(prompt, text)
        outcome = parse_judgment(response.text)
        state = step(state, outcome, speaker.role, raw_text=response.text,
                     prompt_tokens=response.prompt_tokens, completion_tokens=response.completion_tokens,
                     usage_estimated=response.usage_estimated)
        if outcome.ok:
            return state, True
        text = FORMAT_REMINDER
    return state, False


def _transcript(segment: CodeSegment, state: DiscussionState) -> DiscussionTranscript:
    return DiscussionTranscript(
        segment_id=segment.id,
        turns=state.history,
        rounds_used=state.round,
        consensus_reached=state.consensus,
        final_judgment=state.tester_last,
    )


def run_single_role(
    segment: CodeSegment,
    config: RunConfig,
    backend: ChatBackend,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> DiscussionTranscript:
    """One tester query (plus format retries). Consensus is true by convention when a verdict was parsed."""
    if config.approach is not Approach.SINGLE_ROLE:
        raise ValueError("run_single_role needs approach=single_role")
    state = DiscussionState(max_depth=config.max_depth)
    tester = _Speaker(Role.TESTER, config, backend)
    state, ok = _speak(state, tester, render_initial(Role.TESTER, segment, config.prompt_style, templates=templates))
    state = replace(state, stage=Stage.CONCLUSION, consensus=ok)
    return _transcript(segment, state)


def run_multi_role(
    segment: CodeSegment,
    config: RunConfig,
    backend: ChatBackend,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> DiscussionTranscript:
    if config.approach is not Approach.MULTI_ROLE:
        raise ValueError("run_multi_role needs approach=multi_role")
    state = DiscussionState(max_depth=config.max_depth)
    tester = _Speaker(Role.TESTER, config, backend)
    developer = _Speaker(Role.DEVELOPER, config, backend)

    while state.stage is not Stage.CONCLUSION:
        if state.stage is Stage.INITIALIZATION:
            prompt = render_initial(Role.TESTER, segment, config.prompt_style, templates=templates)
        else:
            prompt = render_discussion(Role.TESTER, segment, state.developer_last, state.tester_last, templates)
        state, ok = _speak(state, tester, prompt)
        if not ok and state.tester_last is None:
            # Nothing to forward to the developer: the segment is unparseable.
            state = finish(state)
            break

        if state.stage is Stage.INITIALIZATION:
            prompt = render_initial(Role.DEVELOPER, segment, config.prompt_style, peer=state.tester_last,
                                    templates=templates)
        else:
            prompt = render_discussion(Role.DEVELOPER, segment, state.tester_last, state.developer_last, templates)
        state, ok = _speak(state, developer, prompt)
        if not ok:
            state = finish(state)
    return _transcript(segment, state)


def run(
    segment: CodeSegment,
    config: RunConfig,
    backend: ChatBackend,
    templates: Mapping[str, PromptTemplate] | None = None,
) -> DiscussionTranscript:
    if config.approach is Approach.SINGLE_ROLE:
        return run_single_role(segment, config, backend, templates)
    return run_multi_role(segment, config, backend, templates)
