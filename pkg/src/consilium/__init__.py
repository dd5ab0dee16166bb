"""Tester/developer LLM discussions for vulnerability detection, plus an evaluation harness."""

from .backend import ChatRequest, ChatResponse, OpenAICompatibleBackend, ScriptedBackend, usage_total
from .core import (
    Approach,
    CodeSegment,
    DiscussionTranscript,
    Judgment,
    PromptStyle,
    Role,
    RunConfig,
    Stage,
    Turn,
    VulnCategory,
    validate_config,
)
from .engine import run_multi_role, run_single_role, step
from .evalkit import MetricsReport, confusion, improvement_summary, prf, table1_consistency
from .parser import parse_judgment

__version__ = "0.1.0"
