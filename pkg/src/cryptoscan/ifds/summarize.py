"""Bottom-up summarization over the call graph's SCC order."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from .engine import EngineContext, Explorer
from .summary import DONE, IN_PROGRESS, FactSummary, exit_universe

log = logging.getLogger(__name__)

MAX_ROUNDS = 64


class SummaryOrderError(AssertionError):
    """A function was summarized before one of its non-recursive callees."""


def summarize_function(ctx: EngineContext, fname: str) -> dict:
    """Explore ``fname``'s body once and return its exit-fact table.

    The exploded graph is built lazily and shared by every exit fact, so the
    body is explored a single time however many facts are asked about.
    """
    ctx.store.count_exploration(fname)
    ex = Explorer(ctx, fname)
    table = {}
    for ef in exit_universe(ctx.program, fname, ctx.k):
        reach = ex.explore(ex.exit_starts(ef))
        table[ef] = FactSummary(dict(reach.escapes), dict(reach.events))
    return table


def _signature(table: dict) -> dict:
    return {ef: s.signature() for ef, s in table.items()}


def summarize_component(ctx: EngineContext, members: list[str], recursive: bool,
                        callees_of=None) -> None:
    store = ctx.store
    if callees_of is not None:
        comp = set(members)
        for m in members:
            for c in callees_of(m):
                if c not in comp and store.status.get(c) != DONE:
                    raise SummaryOrderError(f"@{m} summarized before its callee @{c}")
    for m in members:
        store.mark(m, IN_PROGRESS)
    if not recursive:
        (m,) = members
        store.put(m, summarize_function(ctx, m))
        store.mark(m, DONE)
        return
    store.in_scc.update(members)
    for m in members:
        # Bottom of the lattice: every exit fact reaches nothing yet.
        store.put(m, {ef: FactSummary() for ef in exit_universe(ctx.program, m, ctx.k)})
    rounds = 0
    while True:
        rounds += 1
        if rounds > MAX_ROUNDS:
            raise RuntimeError(f"summary fixpoint did not converge for {members}")
        changed = False
        for m in members:
            table = summarize_function(ctx, m)
            if _signature(table) != _signature(store.table(m)):
                changed = True
            store.put(m, table)
        if not changed:
            break
    for m in members:
        store.rounds[m] = rounds
        store.mark(m, DONE)


def summarize_all(ctx: EngineContext, order, graph, workers: int = 1,
                  check_order: bool = True) -> None:
    """Summarize every call-graph node, level by level.

    Components inside one level are independent and may run in parallel;
    a level starts only after the previous one has finished.
    """
    callees_of = graph.callees_of if check_order else None
    pool: Optional[ThreadPoolExecutor] = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for level in order.levels:
            jobs = [(sorted(order.components[ci], key=graph.node_index),
                     order.is_recursive(ci)) for ci in level]
            if pool is None:
                for members, rec in jobs:
                    summarize_component(ctx, members, rec, callees_of)
            else:
                futures = [pool.submit(summarize_component, ctx, members, rec, callees_of)
                           for members, rec in jobs]
                for f in futures:
                    f.result()
    finally:
        if pool is not None:
            pool.shutdown()
