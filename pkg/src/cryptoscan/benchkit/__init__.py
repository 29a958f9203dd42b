from .corpus import CATEGORIES, CorpusError, FixtureCase, by_tag, load_corpus, parse_case
from .generator import chain_program
from .oracle import OracleConfig, OracleInapplicable, OracleResult, call_depth, finding_key, oracle_analyze, oracle_solve
from .scoring import MetricsRow, format_table, is_reported, metrics_json, run_corpus, score

__all__ = [
    "CATEGORIES", "CorpusError", "FixtureCase", "by_tag", "load_corpus", "parse_case", "chain_program",
    "OracleConfig", "OracleInapplicable", "OracleResult", "call_depth", "finding_key", "oracle_analyze",
    "oracle_solve", "MetricsRow", "format_table", "is_reported", "metrics_json", "run_corpus", "score",
]
