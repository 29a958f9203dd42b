from .group1 import Seed, Verdict, apply_verifying_rule, classify_prng, match_sinks, type_gate
from .group2 import PatternReport, check_hostname_verifier, check_ssl_socket_factory, check_trust_manager, run_group2
from .rules import PatternRule, PrngRule, RuleSet, RulesError, SinkRule, default_rules, dump_rules, load_rules

__all__ = [
    "Seed", "Verdict", "apply_verifying_rule", "classify_prng", "match_sinks", "type_gate",
    "PatternReport", "check_hostname_verifier", "check_ssl_socket_factory", "check_trust_manager", "run_group2",
    "PatternRule", "PrngRule", "RuleSet", "RulesError", "SinkRule", "default_rules", "dump_rules", "load_rules",
]
