"""Tokenizer for the supported Verilog subset."""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import VerilogSyntaxError

KEYWORDS = frozenset(
    """
    module endmodule input output inout wire reg assign always initial
    begin end if else case casex casez endcase default posedge negedge
    or parameter localparam and nand nor xor xnor not buf supply0 supply1
    """.split()
)

# keywords that are legal Verilog but outside the supported subset;
# value = construct name reported in the error
UNSUPPORTED_KEYWORDS = {
    "generate": "generate",
    "endgenerate": "generate",
    "genvar": "generate",
    "function": "function",
    "endfunction": "function",
    "task": "task",
    "endtask": "task",
    "event": "event declaration",
    "specify": "specify block",
    "endspecify": "specify block",
    "fork": "fork/join",
    "join": "fork/join",
    "for": "for loop",
    "while": "while loop",
    "forever": "forever loop",
    "repeat": "repeat loop",
    "wait": "wait statement",
    "disable": "disable statement",
    "force": "force statement",
    "release": "release statement",
    "deassign": "deassign statement",
    "defparam": "defparam",
    "primitive": "user-defined primitive",
    "endprimitive": "user-defined primitive",
    "table": "user-defined primitive",
    "integer": "integer declaration",
    "real": "real declaration",
    "time": "time declaration",
    "signed": "signed declaration",
    "tri": "tri net",
    "trireg": "trireg net",
    "logic": "SystemVerilog",
    "bit": "SystemVerilog",
    "byte": "SystemVerilog",
    "always_ff": "SystemVerilog",
    "always_comb": "SystemVerilog",
    "always_latch": "SystemVerilog",
    "typedef": "SystemVerilog",
    "enum": "SystemVerilog",
    "struct": "SystemVerilog",
    "interface": "SystemVerilog",
    "package": "SystemVerilog",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<NUMBER>(?:[0-9][0-9_]*)?'[sS]?[bBoOdDhH][0-9a-fA-FxXzZ_?]+
        |[0-9][0-9_]*)
  | (?P<ID>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<SYSID>\$[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<STRING>"(?:\\.|[^"\\\n])*")
  | (?P<OP><<<|>>>|===|!==|==|!=|<=|>=|<<|>>|&&|\|\||~&|~\||~\^|\^~|\*\*
        |[-+*/%&|^~!<>=?:()\[\]{};,.\#@])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    type: str  # one of: ID, KW, NUMBER, STRING, SYSID, OP, EOF
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    """Scan text into tokens; comments must already be stripped.

    Raises VerilogSyntaxError on characters outside the subset's alphabet.
    """
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch in " \t\r\n":
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise VerilogSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup or "OP"
        value = m.group()
        if kind == "ID" and value in KEYWORDS:
            kind = "KW"
        tokens.append(Token(kind, value, line, col))
        col += len(value)
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens
