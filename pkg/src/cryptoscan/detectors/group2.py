"""Group 2: intra-procedural SSL/TLS verification patterns."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from ..cir.model import (
    BitCast,
    CallStatic,
    CallVirtual,
    ConstInt,
    FunctionDef,
    Location,
    Phi,
    Program,
    Ret,
    Throw,
    split_qname,
)
from .rules import RuleSet

HOSTNAME_VERIFIER = "javax.net.ssl.HostnameVerifier"
TRUST_MANAGERS = ("javax.net.ssl.X509TrustManager", "javax.net.ssl.TrustManager")
SSL_SOCKET_FACTORY = "javax.net.ssl.SSLSocketFactory"
CERT_EXCEPTION = "java.security.cert.CertificateException"
# CertificateException, its library subclasses and its supertypes: a throw or
# catch of any of these can carry a failed verification.
CERT_FAMILY = frozenset({
    CERT_EXCEPTION,
    "java.security.cert.CertificateExpiredException",
    "java.security.cert.CertificateNotYetValidException",
    "java.security.GeneralSecurityException",
    "java.lang.Exception",
    "java.lang.Throwable",
})


@dataclass(frozen=True)
class PatternReport:
    function: str
    pattern: str
    witness: tuple[Location, ...]


def implements(p: Program, class_name: str, iface: str) -> bool:
    return class_name == iface or iface in p.supertypes(class_name)


def _in_cert_family(p: Program, t: Optional[str]) -> bool:
    if t is None:
        return True  # unknown exception type: assume it can reject
    return t in CERT_FAMILY or any(s in CERT_FAMILY for s in p.supertypes(t))


def _is_verify_call(p: Program, f: FunctionDef, inst, rules: RuleSet) -> bool:
    if isinstance(inst, CallVirtual):
        return inst.method in rules.verification_apis
    if isinstance(inst, CallStatic):
        return split_qname(inst.callee)[1] in rules.verification_apis
    return False


def _true_const(p: Program, f: FunctionDef, value: str) -> bool:
    info = p.info(f.name)
    todo, seen = [value], set()
    while todo:
        v = todo.pop()
        if v in seen:
            continue
        seen.add(v)
        inst = info.def_inst.get(v)
        if isinstance(inst, ConstInt):
            if inst.value == 0:
                return False
        elif isinstance(inst, Phi):
            todo.extend(a for a, _ in inst.arms)
        elif isinstance(inst, BitCast):
            todo.append(inst.src)
        else:
            return False
    return True


def check_hostname_verifier(p: Program, f: FunctionDef) -> Optional[PatternReport]:
    if not f.is_instance or f.simple_name != "verify" or not implements(p, f.owner, HOSTNAME_VERIFIER):
        return None
    info = p.info(f.name)
    rets = []
    for lbl in info.reachable():
        blk = f.block(lbl)
        term = blk.terminator
        if isinstance(term, Ret):
            rets.append((Location(f.name, lbl, len(blk.instructions) - 1), term))
    if not rets or any(t.value is None or not _true_const(p, f, t.value) for _, t in rets):
        return None
    return PatternReport(f.name, "VerifierAlwaysTrue", tuple(loc for loc, _ in rets))


def _trust_target(p: Program, f: FunctionDef) -> bool:
    return (f.is_instance and f.simple_name in ("checkClientTrusted", "checkServerTrusted")
            and any(implements(p, f.owner, t) for t in TRUST_MANAGERS))


def check_trust_manager(p: Program, f: FunctionDef, rules: RuleSet) -> list[PatternReport]:
    if not _trust_target(p, f):
        return []
    info = p.info(f.name)
    reachable = info.reachable()
    verify_sites: list[Location] = []
    rejecting: list[Location] = []
    guarded_blocks: set[str] = set()
    for lbl in reachable:
        for i, inst in enumerate(f.block(lbl).instructions):
            loc = Location(f.name, lbl, i)
            if _is_verify_call(p, f, inst, rules):
                verify_sites.append(loc)
                guarded_blocks.add(lbl)
            elif isinstance(inst, Throw) and _in_cert_family(p, info.type_of(inst.value)):
                rejecting.append(loc)
                guarded_blocks.add(lbl)
    reports: list[PatternReport] = []
    entry = Location(f.name, f.blocks[0].label, 0)
    p1 = not verify_sites and not rejecting
    if p1:
        reports.append(PatternReport(f.name, "TrustMissingVerification", (entry,)))
    for h in f.handlers:
        if not _in_cert_family(p, h.caught_type) and not p.is_subtype(h.caught_type, CERT_EXCEPTION):
            continue
        protected = set(info.protected_blocks(h))
        inside = [v for v in verify_sites if v.block in protected]
        if not inside:
            continue
        region = _reach(info, h.handler, lambda b: True, exceptional=True)
        if not any(isinstance(i, Throw) for b in region for i in f.block(b).instructions):
            reports.append(PatternReport(f.name, "TrustCaughtNotThrown",
                                         (inside[0], Location(f.name, h.handler, 0))))
    if not p1:
        entry_lbl = f.blocks[0].label
        if entry_lbl not in guarded_blocks:
            clean = _reach(info, entry_lbl, lambda b: b not in guarded_blocks, exceptional=False)
            exits = [b for b in clean if isinstance(f.block(b).terminator, Ret)]
            if exits:
                b = sorted(exits, key=info.block_index.get)[0]
                reports.append(PatternReport(f.name, "TrustMissingOnPath",
                                             (entry, Location(f.name, b, len(f.block(b).instructions) - 1))))
    return reports


def _reach(info, start: str, allowed, exceptional: bool) -> list[str]:
    seen = [start]
    todo = deque([start])
    while todo:
        cur = todo.popleft()
        succs = info.all_succs(cur) if exceptional else info.succs.get(cur, [])
        for s in succs:
            if s not in seen and allowed(s):
                seen.append(s)
                todo.append(s)
    return seen


def _hv_verify(p: Program, f: FunctionDef, inst) -> bool:
    if not isinstance(inst, CallVirtual) or inst.method != "verify":
        return False
    t = p.info(f.name).type_of(inst.receiver)
    return t is not None and implements(p, t, HOSTNAME_VERIFIER)


def check_ssl_socket_factory(p: Program, f: FunctionDef, rules: RuleSet) -> Optional[PatternReport]:
    info = p.info(f.name)
    for loc, inst in f.iter_instructions():
        if not isinstance(inst, (CallStatic, CallVirtual)) or inst.dest is None:
            continue
        if info.type_of(inst.dest) != SSL_SOCKET_FACTORY:
            continue
        exit_loc = _unverified_exit(p, f, loc)
        if exit_loc is not None:
            return PatternReport(f.name, "FactoryWithoutVerify", (loc, exit_loc))
    return None


def _unverified_exit(p: Program, f: FunctionDef, start: Location) -> Optional[Location]:
    """Some ret reachable from ``start`` without passing a hostname verify call."""
    info = p.info(f.name)

    def scan(lbl: str, from_index: int) -> tuple[bool, Optional[Location]]:
        insts = f.block(lbl).instructions
        for i in range(from_index, len(insts)):
            if _hv_verify(p, f, insts[i]):
                return True, None
            if isinstance(insts[i], Ret):
                return False, Location(f.name, lbl, i)
        return False, None

    verified, hit = scan(start.block, start.index + 1)
    if verified:
        return None
    if hit is not None:
        return hit
    seen = {start.block}
    todo = deque(info.succs.get(start.block, []))
    while todo:
        lbl = todo.popleft()
        if lbl in seen:
            continue
        seen.add(lbl)
        verified, hit = scan(lbl, 0)
        if verified:
            continue
        if hit is not None:
            return hit
        todo.extend(info.succs.get(lbl, []))
    return None


def run_group2(p: Program, rules: RuleSet, functions=None) -> list[PatternReport]:
    names = list(functions) if functions is not None else [f.name for f in p.functions]
    out: list[PatternReport] = []
    for name in names:
        f = p.function(name)
        r = check_hostname_verifier(p, f)
        if r:
            out.append(r)
        out.extend(check_trust_manager(p, f, rules))
        r = check_ssl_socket_factory(p, f, rules)
        if r:
            out.append(r)
    return out
