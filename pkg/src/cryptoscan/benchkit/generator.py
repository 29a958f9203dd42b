"""Synthetic call-chain programs for the performance smoke test."""

from __future__ import annotations


def chain_program(n: int, literal: str = "DES") -> str:
    """CIR text for ``main`` feeding a constant through ``n`` pass-through
    functions into one Cipher.getInstance sink."""
    if n < 1:
        raise ValueError("chain length must be >= 1")
    lines = [
        "func @Chain.main() -> void {",
        "bb0:",
        f'  %a = const.str "{literal}"',
        "  %t = call @Chain.f0(%a)",
        "  %c = call @javax.crypto.Cipher.getInstance(%t)",
        "  ret",
        "}",
    ]
    for i in range(n):
        lines.append(f"func @Chain.f{i}(%x : String) -> String {{")
        lines.append("bb0:")
        if i + 1 < n:
            lines.append(f"  %y = call @Chain.f{i + 1}(%x)")
            lines.append("  ret %y")
        else:
            lines.append("  ret %x")
        lines.append("}")
    return "\n".join(lines) + "\n"
