"""Backward IFDS engine: facts, flow functions, summaries and the solver."""

from .engine import (DEFAULT_BUDGET, EngineContext, Explorer, FactBudgetExceeded, Reach, solve_backward,
                     solve_from_exits, terminal_events)
from .events import ConstantSource, EscapedToEntry, Exhausted, FlowEvent, Sanitized, VerifierHit, describe, event_sort_key
from .facts import DEFAULT_K, RET, THIS, ZERO, DataFact, make_fact, parse_fact
from .flow import FlowContractError, call_flow, flow, pass_args, phi_flow, return_val
from .summarize import SummaryOrderError, summarize_all, summarize_component, summarize_function
from .summary import FactSummary, SummaryEdge, SummaryStore, exit_universe
from .witness import Step, Witness, flatten

__all__ = [
    "DEFAULT_BUDGET", "EngineContext", "Explorer", "FactBudgetExceeded", "Reach", "solve_backward", "solve_from_exits",
    "terminal_events",
    "ConstantSource", "EscapedToEntry", "Exhausted", "FlowEvent", "Sanitized", "VerifierHit", "describe",
    "event_sort_key", "DEFAULT_K", "RET", "THIS", "ZERO", "DataFact", "make_fact", "parse_fact",
    "FlowContractError", "call_flow", "flow", "pass_args", "phi_flow", "return_val",
    "SummaryOrderError", "summarize_all", "summarize_component", "summarize_function",
    "FactSummary", "SummaryEdge", "SummaryStore", "exit_universe", "Step", "Witness", "flatten",
]
