"""The rule catalog: sinks, sanitizers, verifiers and weak-algorithm sets."""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, replace
from typing import Optional

CHECKS = ("constant", "cipher-spec", "hash-spec", "min-int", "seed-source", "key-material")
PATTERNS = ("TrustMissingVerification", "TrustCaughtNotThrown", "TrustMissingOnPath",
            "VerifierAlwaysTrue", "FactoryWithoutVerify")


class RulesError(ValueError):
    def __init__(self, message: str, line: int = 0) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class SinkRule:
    rule_id: str
    cwe: str
    api: str
    arg_index: int  # -1 is the receiver
    check: str
    expected_type: str
    severity: str = "medium"

    def __post_init__(self) -> None:
        if self.check not in CHECKS:
            raise RulesError(f"unknown check {self.check!r}")
        if self.check == "min-int" and self.expected_type not in ("int", "long"):
            raise RulesError(f"min-int check on non-integer type {self.expected_type!r}")
        if self.arg_index < -1:
            raise RulesError(f"bad argument index {self.arg_index}")


@dataclass(frozen=True)
class PatternRule:
    rule_id: str
    cwe: str
    pattern: str
    severity: str = "high"


@dataclass(frozen=True)
class PrngRule:
    rule_id: str
    cwe: str
    severity: str = "medium"


DEFAULT_SINKS = (
    SinkRule("R2", "330", "java.security.SecureRandom.setSeed", 0, "seed-source", "bytes", "medium"),
    SinkRule("R3", "328", "java.security.MessageDigest.getInstance", 0, "hash-spec", "String", "medium"),
    SinkRule("R4", "327", "javax.crypto.Cipher.getInstance", 0, "cipher-spec", "String", "high"),
    SinkRule("R5", "798", "java.security.KeyStore.load", 1, "constant", "String", "high"),
    SinkRule("R6", "321", "javax.crypto.spec.SecretKeySpec.<init>", 0, "key-material", "bytes", "high"),
    SinkRule("R7", "798", "javax.crypto.spec.PBEKeySpec.<init>", 0, "constant", "String", "high"),
    SinkRule("R8", "916", "javax.crypto.spec.PBEParameterSpec.<init>", 1, "min-int", "int", "medium"),
    SinkRule("R9", "760", "javax.crypto.spec.PBEParameterSpec.<init>", 0, "constant", "bytes", "medium"),
    SinkRule("R10", "329", "javax.crypto.spec.IvParameterSpec.<init>", 0, "constant", "bytes", "medium"),
)

DEFAULT_PATTERNS = (
    PatternRule("R11", "295", "TrustMissingVerification"),
    PatternRule("R12", "295", "TrustCaughtNotThrown"),
    PatternRule("R13", "295", "TrustMissingOnPath"),
    PatternRule("R14", "297", "VerifierAlwaysTrue"),
    PatternRule("R15", "297", "FactoryWithoutVerify"),
)

DEFAULT_PRNG = PrngRule("R1", "330", "medium")

_SETS = {"ciphers": "weak_ciphers", "hashes": "weak_hashes", "blockciphers": "block_ciphers"}


@dataclass(frozen=True)
class RuleSet:
    sinks: tuple[SinkRule, ...] = DEFAULT_SINKS
    patterns: tuple[PatternRule, ...] = DEFAULT_PATTERNS
    prng: Optional[PrngRule] = DEFAULT_PRNG
    sanitizer_classes: frozenset = frozenset({"java.security.SecureRandom"})
    verifier_classes: frozenset = frozenset({"java.util.Random"})
    weak_ciphers: frozenset = frozenset({"DES", "RC2", "RC4", "Blowfish", "IDEA"})
    weak_hashes: frozenset = frozenset({"MD2", "MD5", "SHA1"})
    block_ciphers: frozenset = frozenset({"AES", "DES", "Blowfish", "RC2", "IDEA"})
    secure_seed_sources: frozenset = frozenset({"java.security.SecureRandom.generateSeed"})
    verification_apis: frozenset = frozenset({"checkValidity", "verify"})
    min_iteration: int = 1000

    def sink(self, rule_id: str) -> Optional[SinkRule]:
        return next((s for s in self.sinks if s.rule_id == rule_id), None)

    def pattern(self, name: str) -> Optional[PatternRule]:
        return next((r for r in self.patterns if r.pattern == name), None)

    def rule_info(self, rule_id: str) -> tuple[str, str]:
        """(cwe, severity) for any rule id."""
        for r in (*self.sinks, *self.patterns, *([self.prng] if self.prng else [])):
            if r.rule_id == rule_id:
                return r.cwe, r.severity
        raise KeyError(rule_id)

    def sinks_for(self, api: str) -> list[SinkRule]:
        return [s for s in self.sinks if s.api == api]


def default_rules() -> RuleSet:
    return RuleSet()


def _kv(parts: list[str], line: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for p in parts:
        if "=" not in p:
            raise RulesError(f"expected key=value, got {p!r}", line)
        k, v = p.split("=", 1)
        out[k] = v
    return out


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


_SET_RE = re.compile(r"^weakset\s+(\w+)\s*(\+=|-=|=)\s*(.*)$")


def load_rules(text: str, base: Optional[RuleSet] = None) -> RuleSet:
    """Parse a rules file; any section not mentioned keeps its default."""
    rs = base or RuleSet()
    sinks: Optional[list[SinkRule]] = None
    patterns: Optional[list[PatternRule]] = None
    sanitizers: Optional[set[str]] = None
    verifiers: Optional[set[str]] = None
    seeds: Optional[set[str]] = None
    updates: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SET_RE.match(line)
        if m:
            name, op, rest = m.groups()
            if name not in _SETS:
                raise RulesError(f"unknown weakset {name!r}", lineno)
            attr = _SETS[name]
            cur = set(updates.get(attr, getattr(rs, attr)))
            vals = set(_names(rest))
            cur = vals if op == "=" else (cur | vals if op == "+=" else cur - vals)
            updates[attr] = frozenset(cur)
            continue
        words = line.split()
        head = words[0]
        if head == "minimum":
            mm = re.match(r"^minimum\s+iteration\s*=\s*(-?\d+)$", line)
            if not mm:
                raise RulesError("expected 'minimum iteration = N'", lineno)
            updates["min_iteration"] = int(mm.group(1))
        elif head == "sink":
            if len(words) < 2:
                raise RulesError("sink needs an id", lineno)
            kv = _kv(words[2:], lineno)
            unknown = set(kv) - {"cwe", "api", "arg", "check", "type", "severity"}
            if unknown or not {"cwe", "api", "arg", "check", "type"} <= set(kv):
                raise RulesError(f"bad sink fields {sorted(kv)}", lineno)
            try:
                arg = int(kv["arg"])
                rule = SinkRule(words[1], kv["cwe"], kv["api"], arg, kv["check"], kv["type"],
                                kv.get("severity", "medium"))
            except ValueError as exc:
                raise RulesError(str(exc), lineno) from None
            sinks = (sinks or []) + [rule]
        elif head == "pattern":
            kv = _kv(words[2:], lineno) if len(words) > 2 else {}
            if set(kv) - {"cwe", "name", "severity"} or "name" not in kv or "cwe" not in kv:
                raise RulesError("expected 'pattern ID cwe=N name=P [severity=S]'", lineno)
            if kv["name"] not in PATTERNS:
                raise RulesError(f"unknown pattern {kv['name']!r}", lineno)
            patterns = (patterns or []) + [PatternRule(words[1], kv["cwe"], kv["name"], kv.get("severity", "high"))]
        elif head == "prng":
            kv = _kv(words[2:], lineno) if len(words) > 2 else {}
            if set(kv) - {"cwe", "severity"} or "cwe" not in kv:
                raise RulesError("expected 'prng ID cwe=N [severity=S]'", lineno)
            updates["prng"] = PrngRule(words[1], kv["cwe"], kv.get("severity", "medium"))
        elif head in ("sanitizer", "verifier"):
            if len(words) != 3 or words[1] != "class":
                raise RulesError(f"expected '{head} class NAME'", lineno)
            if head == "sanitizer":
                sanitizers = (sanitizers or set()) | {words[2]}
            else:
                verifiers = (verifiers or set()) | {words[2]}
        elif head == "secure-seed":
            seeds = (seeds or set()) | set(_names(line[len("secure-seed"):]))
        elif head == "verifyapi":
            updates["verification_apis"] = frozenset(_names(line[len("verifyapi"):]))
        else:
            raise RulesError(f"unknown directive {head!r}", lineno)
    if sinks is not None:
        ids = [s.rule_id for s in sinks]
        if len(set(ids)) != len(ids):
            raise RulesError("duplicate sink id")
        updates["sinks"] = tuple(sinks)
    if patterns is not None:
        updates["patterns"] = tuple(patterns)
    if sanitizers is not None:
        updates["sanitizer_classes"] = frozenset(sanitizers)
    if verifiers is not None:
        updates["verifier_classes"] = frozenset(verifiers)
    if seeds is not None:
        updates["secure_seed_sources"] = frozenset(seeds)
    return replace(rs, **updates)


def dump_rules(rs: RuleSet) -> str:
    def join(xs) -> str:
        return ", ".join(sorted(xs))

    lines = [
        f"weakset ciphers = {join(rs.weak_ciphers)}",
        f"weakset hashes = {join(rs.weak_hashes)}",
        f"weakset blockciphers = {join(rs.block_ciphers)}",
        f"minimum iteration = {rs.min_iteration}",
    ]
    for s in rs.sinks:
        lines.append(f"sink {s.rule_id} cwe={s.cwe} api={s.api} arg={s.arg_index} check={s.check} "
                     f"type={s.expected_type} severity={s.severity}")
    for p in rs.patterns:
        lines.append(f"pattern {p.rule_id} cwe={p.cwe} name={p.pattern} severity={p.severity}")
    if rs.prng is not None:
        lines.append(f"prng {rs.prng.rule_id} cwe={rs.prng.cwe} severity={rs.prng.severity}")
    lines += [f"sanitizer class {c}" for c in sorted(rs.sanitizer_classes)]
    lines += [f"verifier class {c}" for c in sorted(rs.verifier_classes)]
    if rs.secure_seed_sources:
        lines.append(f"secure-seed {join(rs.secure_seed_sources)}")
    lines.append(f"verifyapi {join(rs.verification_apis)}")
    return "\n".join(lines) + "\n"


def check_against_program(rs: RuleSet, program) -> list[str]:
    """Warnings for sinks whose API does not resolve in ``program``."""
    out = []
    for s in rs.sinks:
        decls = [e for e in program.externs if not e.is_class and e.name == s.api]
        if not decls:
            out.append(f"sink {s.rule_id}: API {s.api} is not declared")
        elif s.arg_index >= 0 and all(s.arg_index >= e.arity for e in decls):
            out.append(f"sink {s.rule_id}: argument {s.arg_index} out of range for {s.api}")
    for msg in out:
        warnings.warn(msg, stacklevel=2)
    return out
