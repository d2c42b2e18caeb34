"""Recursive-descent parser producing a concrete syntax tree.

Tree nodes carry Verilog grammar token names as labels; identifier and
literal leaves carry the source text in ``name``.
"""
from __future__ import annotations

import sys
from contextlib import contextmanager
from dataclasses import dataclass, field

from ..errors import UnsupportedConstructError, VerilogSyntaxError
from .lexer import UNSUPPORTED_KEYWORDS, Token, tokenize


@contextmanager
def deep_stack(limit: int = 10000):
    """Temporarily raise the interpreter recursion limit.

    Recursive descent burns roughly 15 frames per expression nesting level,
    so generated netlists with deeply parenthesized expressions need more
    headroom than the default.  The ceiling stays below the point where
    CPython's C stack overflows before RecursionError can fire."""
    old = sys.getrecursionlimit()
    if limit > old:
        sys.setrecursionlimit(limit)
    try:
        yield
    finally:
        sys.setrecursionlimit(old)

_BINOP = {
    "**": "Power",
    "*": "Times",
    "/": "Divide",
    "%": "Mod",
    "+": "Plus",
    "-": "Minus",
    "<<<": "Sla",
    "<<": "Sll",
    ">>>": "Sra",
    ">>": "Srl",
    "<": "LessThan",
    "<=": "LessEq",
    ">": "GreaterThan",
    ">=": "GreaterEq",
    "==": "Eq",
    "!=": "NotEq",
    "===": "Eql",
    "!==": "NotEql",
    "&": "And",
    "^": "Xor",
    "~^": "Xnor",
    "^~": "Xnor",
    "|": "Or",
    "&&": "Land",
    "||": "Lor",
}

_UNOP = {
    "+": "Uplus",
    "-": "Uminus",
    "!": "Ulnot",
    "~": "Unot",
    "&": "Uand",
    "~&": "Unand",
    "|": "Uor",
    "~|": "Unor",
    "^": "Uxor",
    "~^": "Uxnor",
    "^~": "Uxnor",
}

# loosest-binding first; all left-associative except ** (handled below)
_PRECEDENCE: list[tuple[str, ...]] = [
    ("||",),
    ("&&",),
    ("|",),
    ("^", "~^", "^~"),
    ("&",),
    ("==", "!=", "===", "!=="),
    ("<", "<=", ">", ">="),
    ("<<", ">>", "<<<", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
    ("**",),
]

GATE_PRIMITIVES = ("and", "or", "nand", "nor", "xor", "xnor", "not", "buf")

_STRUCTURAL_LABELS = frozenset(
    """
    Source ModuleDef Paramlist Portlist Port Ioport Input Output Inout
    Decl Wire Reg Parameter Width Assign Lvalue Rvalue Always SensList Sens
    Initial Block IfStatement CaseStatement CasexStatement CasezStatement Case
    BlockingSubstitution NonblockingSubstitution InstanceList Instance PortArg
    Identifier IntConst Cond Concat Repeat Partselect Pointer
    """.split()
)

AST_LABELS = frozenset(_STRUCTURAL_LABELS | set(_BINOP.values()) | set(_UNOP.values()))


@dataclass
class TreeNode:
    label: str
    name: str | None = None
    children: list["TreeNode"] = field(default_factory=list)

    def __repr__(self) -> str:  # compact form keeps test diffs readable
        head = self.label if self.name is None else f"{self.label}:{self.name}"
        if not self.children:
            return head
        return f"{head}({', '.join(repr(c) for c in self.children)})"


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.gate_counter = 0

    # --- token stream helpers ---

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def at(self, type_: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.type == type_ and (value is None or tok.value == value)

    def accept(self, type_: str, value: str | None = None) -> Token | None:
        if self.at(type_, value):
            return self.advance()
        return None

    def expect(self, type_: str, value: str | None = None) -> Token:
        tok = self.peek()
        if not self.at(type_, value):
            want = value if value is not None else type_
            raise VerilogSyntaxError(
                f"expected {want!r}, found {tok.value or tok.type!r}", tok.line, tok.col
            )
        return self.advance()

    def fail(self, msg: str) -> VerilogSyntaxError:
        tok = self.peek()
        return VerilogSyntaxError(msg, tok.line, tok.col)

    def unsupported(self, construct: str) -> UnsupportedConstructError:
        tok = self.peek()
        return UnsupportedConstructError(construct, tok.line, tok.col)

    def check_unsupported(self) -> None:
        tok = self.peek()
        if tok.type == "ID" and tok.value in UNSUPPORTED_KEYWORDS:
            construct = UNSUPPORTED_KEYWORDS[tok.value]
            if tok.value not in construct:
                construct = f"{construct} ({tok.value})"
            raise self.unsupported(construct)
        if tok.type == "SYSID":
            raise self.unsupported(f"system task/function ({tok.value})")

    # --- top level ---

    def parse_source(self) -> TreeNode:
        modules: list[TreeNode] = []
        while not self.at("EOF"):
            self.check_unsupported()
            if self.at("KW", "module"):
                modules.append(self.parse_module())
            else:
                tok = self.peek()
                raise VerilogSyntaxError(
                    f"expected module declaration, found {tok.value!r}", tok.line, tok.col
                )
        if not modules:
            raise VerilogSyntaxError("no module declaration found", 1, 1)
        if len(modules) == 1:
            return modules[0]
        return TreeNode("Source", None, modules)

    def parse_module(self) -> TreeNode:
        self.expect("KW", "module")
        name = self.expect("ID").value
        children: list[TreeNode] = []
        if self.accept("OP", "#"):
            children.append(self.parse_param_header())
        children.append(self.parse_portlist())
        self.expect("OP", ";")
        children.extend(self.parse_module_items())
        self.expect("KW", "endmodule")
        return TreeNode("ModuleDef", name, children)

    def parse_param_header(self) -> TreeNode:
        self.expect("OP", "(")
        params: list[TreeNode] = []
        while True:
            self.expect("KW", "parameter")
            width = self.parse_width() if self.at("OP", "[") else None
            while True:
                pname = self.expect("ID").value
                self.expect("OP", "=")
                value = self.parse_expression()
                kids = [value] + ([width] if width else [])
                params.append(TreeNode("Parameter", pname, kids))
                if not self.accept("OP", ","):
                    break
                if self.at("KW", "parameter"):
                    # comma separated a new parameter keyword group
                    break
            if not self.at("KW", "parameter"):
                break
        self.expect("OP", ")")
        return TreeNode("Paramlist", None, params)

    def parse_portlist(self) -> TreeNode:
        ports: list[TreeNode] = []
        if self.accept("OP", "("):
            if not self.at("OP", ")"):
                last_direction: str | None = None
                last_is_reg = False
                last_width: TreeNode | None = None
                while True:
                    if self.peek().type == "KW" and self.peek().value in (
                        "input",
                        "output",
                        "inout",
                    ):
                        direction = self.advance().value
                        is_reg = False
                        if self.accept("KW", "wire"):
                            pass
                        elif self.accept("KW", "reg"):
                            is_reg = True
                        width = self.parse_width() if self.at("OP", "[") else None
                        pname = self.expect("ID").value
                        ports.append(self._ansi_port(direction, is_reg, width, pname))
                        last_direction, last_is_reg, last_width = direction, is_reg, width
                    elif self.at("ID") and last_direction is not None:
                        pname = self.advance().value
                        ports.append(
                            self._ansi_port(last_direction, last_is_reg, last_width, pname)
                        )
                    elif self.at("ID"):
                        ports.append(TreeNode("Port", self.advance().value))
                    else:
                        self.check_unsupported()
                        raise self.fail("malformed port list")
                    if not self.accept("OP", ","):
                        break
            self.expect("OP", ")")
        return TreeNode("Portlist", None, ports)

    def _ansi_port(
        self, direction: str, is_reg: bool, width: TreeNode | None, pname: str
    ) -> TreeNode:
        dir_label = {"input": "Input", "output": "Output", "inout": "Inout"}[direction]
        kids = [TreeNode(dir_label, pname, [self._copy(width)] if width else [])]
        if is_reg:
            kids.append(TreeNode("Reg", pname, [self._copy(width)] if width else []))
        return TreeNode("Ioport", None, kids)

    @staticmethod
    def _copy(node: TreeNode | None) -> TreeNode:
        assert node is not None
        return TreeNode(node.label, node.name, [_Parser._copy(c) for c in node.children])

    # --- module items ---

    def parse_module_items(self) -> list[TreeNode]:
        items: list[TreeNode] = []
        while not self.at("KW", "endmodule"):
            if self.at("EOF"):
                raise self.fail("missing endmodule")
            items.extend(self.parse_module_item())
        return items

    def parse_module_item(self) -> list[TreeNode]:
        self.check_unsupported()
        tok = self.peek()
        if tok.type == "KW":
            kw = tok.value
            if kw in ("input", "output", "inout"):
                return self.parse_port_decl()
            if kw in ("wire", "reg", "supply0", "supply1"):
                return self.parse_net_decl()
            if kw in ("parameter", "localparam"):
                return self.parse_param_decl()
            if kw == "assign":
                return self.parse_assign()
            if kw == "always":
                return [self.parse_always()]
            if kw == "initial":
                self.advance()
                return [TreeNode("Initial", None, [self.parse_statement()])]
            if kw in GATE_PRIMITIVES:
                return [self.parse_gate_instances()]
            raise self.fail(f"unexpected keyword {kw!r} at module level")
        if tok.type == "ID":
            return [self.parse_module_instances()]
        if self.accept("OP", ";"):
            return []
        if tok.value == "#":
            raise self.unsupported("delay control")
        raise self.fail(f"unexpected token {tok.value!r} at module level")

    def parse_width(self) -> TreeNode:
        self.expect("OP", "[")
        msb = self.parse_expression()
        self.expect("OP", ":")
        lsb = self.parse_expression()
        self.expect("OP", "]")
        return TreeNode("Width", None, [msb, lsb])

    def parse_port_decl(self) -> list[TreeNode]:
        direction = self.advance().value
        dir_label = {"input": "Input", "output": "Output", "inout": "Inout"}[direction]
        is_reg = False
        if self.accept("KW", "wire"):
            pass
        elif self.accept("KW", "reg"):
            is_reg = True
        width = self.parse_width() if self.at("OP", "[") else None
        decls: list[TreeNode] = []
        while True:
            pname = self.expect("ID").value
            decls.append(TreeNode(dir_label, pname, [self._copy(width)] if width else []))
            if is_reg:
                decls.append(TreeNode("Reg", pname, [self._copy(width)] if width else []))
            if not self.accept("OP", ","):
                break
        self.expect("OP", ";")
        return [TreeNode("Decl", None, decls)]

    def parse_net_decl(self) -> list[TreeNode]:
        kw = self.advance().value
        label = "Reg" if kw == "reg" else "Wire"
        width = self.parse_width() if self.at("OP", "[") else None
        decls: list[TreeNode] = []
        extra: list[TreeNode] = []
        while True:
            nname = self.expect("ID").value
            if self.at("OP", "["):
                raise self.unsupported("memory declaration")
            decls.append(TreeNode(label, nname, [self._copy(width)] if width else []))
            if self.accept("OP", "="):
                if label == "Reg":
                    raise self.unsupported("register initializer")
                rhs = self.parse_expression()
                extra.append(
                    TreeNode(
                        "Assign",
                        None,
                        [
                            TreeNode("Lvalue", None, [TreeNode("Identifier", nname)]),
                            TreeNode("Rvalue", None, [rhs]),
                        ],
                    )
                )
            if not self.accept("OP", ","):
                break
        self.expect("OP", ";")
        # a supply net is permanently tied to a constant level
        if kw in ("supply0", "supply1"):
            const = "1'b0" if kw == "supply0" else "1'b1"
            for d in decls:
                extra.append(
                    TreeNode(
                        "Assign",
                        None,
                        [
                            TreeNode("Lvalue", None, [TreeNode("Identifier", d.name)]),
                            TreeNode("Rvalue", None, [TreeNode("IntConst", const)]),
                        ],
                    )
                )
        return [TreeNode("Decl", None, decls)] + extra

    def parse_param_decl(self) -> list[TreeNode]:
        self.advance()  # parameter | localparam
        width = self.parse_width() if self.at("OP", "[") else None
        decls: list[TreeNode] = []
        while True:
            pname = self.expect("ID").value
            self.expect("OP", "=")
            value = self.parse_expression()
            kids = [value] + ([self._copy(width)] if width else [])
            decls.append(TreeNode("Parameter", pname, kids))
            if not self.accept("OP", ","):
                break
        self.expect("OP", ";")
        return [TreeNode("Decl", None, decls)]

    def parse_assign(self) -> list[TreeNode]:
        self.expect("KW", "assign")
        if self.at("OP", "#"):
            raise self.unsupported("delay control")
        items: list[TreeNode] = []
        while True:
            lhs = self.parse_lvalue()
            self.expect("OP", "=")
            rhs = self.parse_expression()
            items.append(
                TreeNode(
                    "Assign",
                    None,
                    [TreeNode("Lvalue", None, [lhs]), TreeNode("Rvalue", None, [rhs])],
                )
            )
            if not self.accept("OP", ","):
                break
        self.expect("OP", ";")
        return items

    def parse_always(self) -> TreeNode:
        self.expect("KW", "always")
        if not self.at("OP", "@"):
            raise self.unsupported("always without event control")
        self.expect("OP", "@")
        senslist = self.parse_senslist()
        stmt = self.parse_statement()
        return TreeNode("Always", None, [senslist, stmt])

    def parse_senslist(self) -> TreeNode:
        if self.accept("OP", "*"):
            return TreeNode("SensList", None, [TreeNode("Sens", "all")])
        self.expect("OP", "(")
        items: list[TreeNode] = []
        if self.accept("OP", "*"):
            items.append(TreeNode("Sens", "all"))
        else:
            while True:
                if self.accept("KW", "posedge"):
                    items.append(TreeNode("Sens", "posedge", [self.parse_expression()]))
                elif self.accept("KW", "negedge"):
                    items.append(TreeNode("Sens", "negedge", [self.parse_expression()]))
                else:
                    items.append(TreeNode("Sens", "level", [self.parse_expression()]))
                if self.accept("KW", "or") or self.accept("OP", ","):
                    continue
                break
        self.expect("OP", ")")
        return TreeNode("SensList", None, items)

    # --- statements ---

    def parse_statement(self) -> TreeNode:
        self.check_unsupported()
        tok = self.peek()
        if tok.type == "KW":
            if tok.value == "begin":
                return self.parse_block()
            if tok.value == "if":
                return self.parse_if()
            if tok.value in ("case", "casex", "casez"):
                return self.parse_case()
            raise self.fail(f"unexpected keyword {tok.value!r} in statement")
        if tok.value == "#":
            raise self.unsupported("delay control")
        if tok.value == "@":
            raise self.unsupported("event control")
        if self.accept("OP", ";"):
            return TreeNode("Block", None, [])
        return self.parse_substitution()

    def parse_block(self) -> TreeNode:
        self.expect("KW", "begin")
        name = None
        if self.accept("OP", ":"):
            name = self.expect("ID").value
        stmts: list[TreeNode] = []
        while not self.at("KW", "end"):
            if self.at("EOF"):
                raise self.fail("missing end")
            stmts.append(self.parse_statement())
        self.expect("KW", "end")
        return TreeNode("Block", name, stmts)

    def parse_if(self) -> TreeNode:
        self.expect("KW", "if")
        self.expect("OP", "(")
        cond = self.parse_expression()
        self.expect("OP", ")")
        then = self.parse_statement()
        kids = [cond, then]
        if self.accept("KW", "else"):
            kids.append(self.parse_statement())
        return TreeNode("IfStatement", None, kids)

    def parse_case(self) -> TreeNode:
        kw = self.advance().value
        label = {"case": "CaseStatement", "casex": "CasexStatement", "casez": "CasezStatement"}[kw]
        self.expect("OP", "(")
        comp = self.parse_expression()
        self.expect("OP", ")")
        items: list[TreeNode] = []
        while not self.at("KW", "endcase"):
            if self.at("EOF"):
                raise self.fail("missing endcase")
            if self.accept("KW", "default"):
                self.accept("OP", ":")
                items.append(TreeNode("Case", None, [self.parse_statement()]))
            else:
                conds = [self.parse_expression()]
                while self.accept("OP", ","):
                    conds.append(self.parse_expression())
                self.expect("OP", ":")
                conds.append(self.parse_statement())
                items.append(TreeNode("Case", None, conds))
        self.expect("KW", "endcase")
        return TreeNode(label, None, [comp] + items)

    def parse_substitution(self) -> TreeNode:
        lhs = self.parse_lvalue()
        if self.accept("OP", "="):
            label = "BlockingSubstitution"
        elif self.accept("OP", "<="):
            label = "NonblockingSubstitution"
        else:
            raise self.fail("expected '=' or '<=' in assignment")
        if self.at("OP", "#"):
            raise self.unsupported("delay control")
        rhs = self.parse_expression()
        self.expect("OP", ";")
        return TreeNode(
            label,
            None,
            [TreeNode("Lvalue", None, [lhs]), TreeNode("Rvalue", None, [rhs])],
        )

    def parse_lvalue(self) -> TreeNode:
        self.check_unsupported()
        if self.at("OP", "{"):
            self.advance()
            parts = [self.parse_lvalue()]
            while self.accept("OP", ","):
                parts.append(self.parse_lvalue())
            self.expect("OP", "}")
            return TreeNode("Concat", None, parts)
        if self.at("ID"):
            return self.parse_postfix(TreeNode("Identifier", self.advance().value))
        raise self.fail("invalid assignment target")

    # --- expressions ---

    def parse_expression(self) -> TreeNode:
        cond = self.parse_binary(0)
        if self.accept("OP", "?"):
            then = self.parse_expression()
            self.expect("OP", ":")
            other = self.parse_expression()
            return TreeNode("Cond", None, [cond, then, other])
        return cond

    def parse_binary(self, level: int) -> TreeNode:
        if level >= len(_PRECEDENCE):
            return self.parse_unary()
        ops = _PRECEDENCE[level]
        left = self.parse_binary(level + 1)
        while self.peek().type == "OP" and self.peek().value in ops:
            op = self.advance().value
            # exponentiation associates right; everything else left
            right = self.parse_binary(level if op == "**" else level + 1)
            left = TreeNode(_BINOP[op], None, [left, right])
        return left

    def parse_unary(self) -> TreeNode:
        tok = self.peek()
        if tok.type == "OP" and tok.value in _UNOP:
            self.advance()
            operand = self.parse_unary()
            return TreeNode(_UNOP[tok.value], None, [operand])
        return self.parse_primary()

    def parse_primary(self) -> TreeNode:
        self.check_unsupported()
        tok = self.peek()
        if tok.type == "NUMBER":
            self.advance()
            return TreeNode("IntConst", tok.value)
        if tok.type == "ID":
            self.advance()
            return self.parse_postfix(TreeNode("Identifier", tok.value))
        if tok.type == "STRING":
            raise self.unsupported("string literal")
        if self.accept("OP", "("):
            inner = self.parse_expression()
            self.expect("OP", ")")
            return self.parse_postfix(inner)
        if self.at("OP", "{"):
            return self.parse_concat()
        raise self.fail(f"unexpected token {tok.value or tok.type!r} in expression")

    def parse_postfix(self, base: TreeNode) -> TreeNode:
        while self.at("OP", "["):
            self.advance()
            first = self.parse_expression()
            if self.accept("OP", ":"):
                second = self.parse_expression()
                base = TreeNode("Partselect", None, [base, first, second])
            else:
                base = TreeNode("Pointer", None, [base, first])
            self.expect("OP", "]")
        return base

    def parse_concat(self) -> TreeNode:
        self.expect("OP", "{")
        first = self.parse_expression()
        if self.at("OP", "{"):
            # replication: {times {expr, ...}}
            self.advance()
            parts = [self.parse_expression()]
            while self.accept("OP", ","):
                parts.append(self.parse_expression())
            self.expect("OP", "}")
            self.expect("OP", "}")
            return TreeNode("Repeat", None, [first, TreeNode("Concat", None, parts)])
        parts = [first]
        while self.accept("OP", ","):
            parts.append(self.parse_expression())
        self.expect("OP", "}")
        return TreeNode("Concat", None, parts)

    # --- instantiation ---

    def parse_gate_instances(self) -> TreeNode:
        gate = self.advance().value
        instances: list[TreeNode] = []
        while True:
            if self.at("OP", "#"):
                raise self.unsupported("delay control")
            if self.at("ID"):
                iname = self.advance().value
            else:
                iname = f"_gate{self.gate_counter}"
                self.gate_counter += 1
            if self.at("OP", "["):
                raise self.unsupported("instance array")
            self.expect("OP", "(")
            args: list[TreeNode] = []
            if not self.at("OP", ")"):
                while True:
                    args.append(TreeNode("PortArg", None, [self.parse_expression()]))
                    if not self.accept("OP", ","):
                        break
            self.expect("OP", ")")
            instances.append(TreeNode("Instance", iname, args))
            if not self.accept("OP", ","):
                break
        self.expect("OP", ";")
        return TreeNode("InstanceList", gate, instances)

    def parse_module_instances(self) -> TreeNode:
        modname = self.advance().value
        if self.at("OP", "#"):
            if self.peek(1).value == "(":
                raise self.unsupported("parameter value override")
            raise self.unsupported("delay control")
        instances: list[TreeNode] = []
        while True:
            iname = self.expect("ID").value
            if self.at("OP", "["):
                raise self.unsupported("instance array")
            self.expect("OP", "(")
            args = self.parse_port_args()
            self.expect("OP", ")")
            instances.append(TreeNode("Instance", iname, args))
            if not self.accept("OP", ","):
                break
        self.expect("OP", ";")
        return TreeNode("InstanceList", modname, instances)

    def parse_port_args(self) -> list[TreeNode]:
        args: list[TreeNode] = []
        if self.at("OP", ")"):
            return args
        while True:
            if self.accept("OP", "."):
                pname = self.expect("ID").value
                self.expect("OP", "(")
                kids: list[TreeNode] = []
                if not self.at("OP", ")"):
                    kids.append(self.parse_expression())
                self.expect("OP", ")")
                args.append(TreeNode("PortArg", pname, kids))
            elif self.at("OP", ",") or self.at("OP", ")"):
                args.append(TreeNode("PortArg", None, []))
            else:
                args.append(TreeNode("PortArg", None, [self.parse_expression()]))
            if not self.accept("OP", ","):
                break
        return args


def parse_verilog(source) -> TreeNode:
    """Parse flattened Verilog text into a tree.

    Accepts a FlatDesign or a plain string.  A single-module design parses
    to a ModuleDef root; several modules are wrapped in a Source node.
    """
    text = getattr(source, "text", source)
    with deep_stack():
        try:
            return _Parser(tokenize(text)).parse_source()
        except RecursionError:
            raise VerilogSyntaxError("expression nesting too deep") from None
