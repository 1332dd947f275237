"""Recursive-descent parser producing ``ast`` nodes.

Keywords are case-insensitive words; any word outside ``RESERVED`` (or a
backquoted name) can be used as an identifier.  Errors carry the line,
column and the set of tokens that would have been accepted.
"""

from __future__ import annotations

from typing import Optional

from ..errors import QuerySyntaxError
from . import ast as A
from .lexer import EOF, FLOAT, INT, OP, QUOTED, STRING, WORD, Token, tokenize

RESERVED = {
    "GO", "FROM", "OVER", "WHERE", "YIELD", "AND", "OR", "XOR", "NOT", "IN", "AS", "STEP", "STEPS",
    "REVERSELY", "BIDIRECT", "FETCH", "LOOKUP", "ON", "INSERT", "DELETE", "VALUES", "ORDER", "BY",
    "LIMIT", "GROUP", "DISTINCT", "ASC", "DESC", "EXPLAIN", "PROFILE", "USE", "WITH", "CONTAINS",
    "NULL", "TRUE", "FALSE", "CREATE", "DROP", "ALTER", "SHOW", "DESCRIBE", "REBUILD", "IF",
}

AGGREGATES = {"count", "sum", "avg", "min", "max", "collect"}

_COMPARE = {"==", "!=", "<>", "<", "<=", ">", ">="}


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers ---------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def span(self, t: Optional[Token] = None) -> A.Span:
        t = t or self.tok
        return A.Span(t.line, t.col)

    def error(self, expected) -> QuerySyntaxError:
        t = self.tok
        got = "end of input" if t.kind == EOF else repr(t.value)
        exp = sorted(expected) if not isinstance(expected, str) else [expected]
        return QuerySyntaxError(f"syntax error near {got}", t.line, t.col, exp)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == WORD and self.tok.upper in words

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == OP and self.tok.value in ops

    def accept_kw(self, *words: str) -> Optional[Token]:
        if self.at_kw(*words):
            return self.advance()
        return None

    def accept_op(self, *ops: str) -> Optional[Token]:
        if self.at_op(*ops):
            return self.advance()
        return None

    def expect_kw(self, *words: str) -> Token:
        if not self.at_kw(*words):
            raise self.error(set(words))
        return self.advance()

    def expect_op(self, *ops: str) -> Token:
        if not self.at_op(*ops):
            raise self.error({f"'{o}'" for o in ops})
        return self.advance()

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind == QUOTED:
            self.advance()
            return t.value
        if t.kind == WORD and t.upper not in RESERVED:
            self.advance()
            return t.value
        raise self.error(what)

    def at_ident(self) -> bool:
        t = self.tok
        return t.kind == QUOTED or (t.kind == WORD and t.upper not in RESERVED)

    def int_lit(self) -> int:
        neg = bool(self.accept_op("-"))
        if self.tok.kind != INT:
            raise self.error("integer")
        v = self.advance().value
        return -v if neg else v

    def string_lit(self) -> str:
        if self.tok.kind != STRING:
            raise self.error("string")
        return self.advance().value

    def if_not_exists(self) -> bool:
        if self.accept_kw("IF"):
            self.expect_kw("NOT")
            self.expect_kw("EXISTS")
            return True
        return False

    def if_exists(self) -> bool:
        if self.accept_kw("IF"):
            self.expect_kw("EXISTS")
            return True
        return False

    # -- entry points ----------------------------------------------------
    def parse_statement(self) -> A.Stmt:
        if self.tok.kind == EOF:
            raise self.error("statement")
        stmt = self.statement()
        self.accept_op(";")
        if self.tok.kind != EOF:
            raise self.error({"'|'", "';'", "end of input"})
        return stmt

    def parse_script(self) -> list[A.Stmt]:
        out = []
        while True:
            while self.accept_op(";"):
                pass
            if self.tok.kind == EOF:
                return out
            out.append(self.statement())
            if self.tok.kind != EOF:
                self.expect_op(";")

    def statement(self) -> A.Stmt:
        sp = self.span()
        if self.accept_kw("EXPLAIN"):
            if self.accept_kw("FORMAT"):
                self.expect_op("=")
                self.ident("format")
            return A.Explain(self.statement(), False, span=sp)
        if self.accept_kw("PROFILE"):
            return A.Explain(self.statement(), True, span=sp)
        left = self.sentence()
        while self.at_op("|"):
            psp = self.span()
            self.advance()
            left = A.Pipe(left, self.sentence(), span=psp)
        return left

    def sentence(self) -> A.Stmt:
        t = self.tok
        kw = t.upper
        fn = {
            "GO": self.go,
            "FETCH": self.fetch,
            "LOOKUP": self.lookup,
            "YIELD": self.yield_stmt,
            "ORDER": self.order_by,
            "LIMIT": self.limit,
            "GROUP": self.group_by,
            "USE": self.use,
            "CREATE": self.create,
            "DROP": self.drop,
            "ALTER": self.alter,
            "SHOW": self.show,
            "DESCRIBE": self.describe,
            "DESC": self.describe,
            "REBUILD": self.rebuild,
            "INSERT": self.insert,
            "DELETE": self.delete,
            "ADD": self.add_hosts,
            "BALANCE": self.balance,
            "GRANT": self.grant,
            "REVOKE": self.grant,
            "CHANGE": self.change_password,
            "KILL": self.kill,
        }.get(kw) if t.kind == WORD else None
        if fn is None:
            raise self.error({"GO", "FETCH", "LOOKUP", "YIELD", "INSERT", "DELETE", "CREATE", "DROP", "ALTER",
                              "SHOW", "DESCRIBE", "USE", "ORDER", "LIMIT", "GROUP", "REBUILD", "EXPLAIN", "PROFILE"})
        return fn()

    # -- queries ---------------------------------------------------------
    def go(self) -> A.Go:
        sp = self.span()
        self.expect_kw("GO")
        steps = 1
        if self.tok.kind == INT:
            steps = self.advance().value
            self.expect_kw("STEP", "STEPS")
        self.expect_kw("FROM")
        src = self.vid_list()
        self.expect_kw("OVER")
        if self.accept_op("*"):
            over = ("*",)
        else:
            names = [self.ident("edge type")]
            while self.accept_op(","):
                names.append(self.ident("edge type"))
            over = tuple(names)
        direction = "out"
        if self.accept_kw("REVERSELY"):
            direction = "in"
        elif self.accept_kw("BIDIRECT"):
            direction = "both"
        where = self.expr() if self.accept_kw("WHERE") else None
        y = self.yield_clause() if self.at_kw("YIELD") else None
        return A.Go(steps, src, over, direction, where, y, span=sp)

    def vid_list(self) -> tuple:
        if self.at_op("$-"):
            return (self.primary(),)
        vids = [self.expr()]
        while self.accept_op(","):
            vids.append(self.expr())
        return tuple(vids)

    def fetch(self) -> A.Fetch:
        sp = self.span()
        self.expect_kw("FETCH")
        self.expect_kw("PROP")
        self.expect_kw("ON")
        if self.accept_op("*"):
            names = ("*",)
        else:
            ls = [self.ident("tag or edge type")]
            while self.accept_op(","):
                ls.append(self.ident("tag"))
            names = tuple(ls)
        # an edge fetch is recognized by the "->" after the first reference
        if self.at_op("$-"):
            refs = (self.primary(),)
            is_edge = False
        else:
            first = self.expr()
            if self.at_op("->"):
                refs = [self.edge_ref_tail(first)]
                while self.accept_op(","):
                    refs.append(self.edge_ref())
                refs = tuple(refs)
                is_edge = True
            else:
                ls = [first]
                while self.accept_op(","):
                    ls.append(self.expr())
                refs = tuple(ls)
                is_edge = False
        y = self.yield_clause() if self.at_kw("YIELD") else None
        return A.Fetch(is_edge, names, refs, y, span=sp)

    def edge_ref(self) -> A.EdgeRef:
        return self.edge_ref_tail(self.additive())

    def edge_ref_tail(self, src: A.Expr) -> A.EdgeRef:
        self.expect_op("->")
        dst = self.additive()
        rank = None
        if self.accept_op("@"):
            rank = self.unary()
        return A.EdgeRef(src, dst, rank, span=src.span)

    def lookup(self) -> A.Lookup:
        sp = self.span()
        self.expect_kw("LOOKUP")
        self.expect_kw("ON")
        schema = self.ident("tag or edge type")
        where = self.expr() if self.accept_kw("WHERE") else None
        y = self.yield_clause() if self.at_kw("YIELD") else None
        return A.Lookup(schema, where, y, span=sp)

    def yield_clause(self) -> A.YieldClause:
        sp = self.span()
        self.expect_kw("YIELD")
        distinct = bool(self.accept_kw("DISTINCT"))
        items = [self.yield_item()]
        while self.accept_op(","):
            items.append(self.yield_item())
        return A.YieldClause(tuple(items), distinct, span=sp)

    def yield_item(self) -> A.YieldItem:
        sp = self.span()
        e = self.expr()
        alias = self.ident("alias") if self.accept_kw("AS") else None
        return A.YieldItem(e, alias, span=sp)

    def yield_stmt(self) -> A.Yield:
        sp = self.span()
        y = self.yield_clause()
        where = self.expr() if self.accept_kw("WHERE") else None
        return A.Yield(y, where, span=sp)

    def order_by(self) -> A.OrderBy:
        sp = self.span()
        self.expect_kw("ORDER")
        self.expect_kw("BY")
        items = []
        while True:
            e = self.expr()
            asc = True
            if self.accept_kw("DESC"):
                asc = False
            else:
                self.accept_kw("ASC")
            items.append((e, asc))
            if not self.accept_op(","):
                break
        return A.OrderBy(tuple(items), span=sp)

    def limit(self) -> A.Limit:
        sp = self.span()
        self.expect_kw("LIMIT")
        a = self.int_lit()
        if self.accept_op(","):
            return A.Limit(self.int_lit(), a, span=sp)
        return A.Limit(a, 0, span=sp)

    def group_by(self) -> A.GroupBy:
        sp = self.span()
        self.expect_kw("GROUP")
        self.expect_kw("BY")
        keys = [self.expr()]
        while self.accept_op(","):
            keys.append(self.expr())
        return A.GroupBy(tuple(keys), self.yield_clause(), span=sp)

    # -- ddl -------------------------------------------------------------
    def use(self) -> A.Use:
        sp = self.span()
        self.expect_kw("USE")
        return A.Use(self.ident("space name"), span=sp)

    def create(self) -> A.Stmt:
        sp = self.span()
        self.expect_kw("CREATE")
        if self.accept_kw("SPACE"):
            ine = self.if_not_exists()
            name = self.ident("space name")
            opts = []
            if self.accept_op("("):
                while True:
                    key = self.ident("space option").lower()
                    self.expect_op("=")
                    if self.tok.kind == INT:
                        val = self.advance().value
                    elif self.tok.kind == STRING:
                        val = self.advance().value
                    else:
                        # vid_type = FIXED_STRING(32)
                        word = self.ident("option value")
                        if self.accept_op("("):
                            word = f"{word.upper()}({self.int_lit()})"
                            self.expect_op(")")
                        val = word
                    opts.append((key, val))
                    if not self.accept_op(","):
                        break
                self.expect_op(")")
            return A.CreateSpace(name, tuple(opts), ine, span=sp)
        if self.accept_kw("USER"):
            ine = self.if_not_exists()
            name = self.ident("user name")
            password = ""
            if self.accept_kw("WITH"):
                self.expect_kw("PASSWORD")
                password = self.string_lit()
            return A.CreateUser(name, password, ine, span=sp)
        is_edge = self.expect_kw("TAG", "EDGE").upper == "EDGE"
        if self.accept_kw("INDEX"):
            ine = self.if_not_exists()
            name = self.ident("index name")
            self.expect_kw("ON")
            schema = self.ident("tag or edge type")
            self.expect_op("(")
            fields = []
            if not self.at_op(")"):
                fields.append(self.ident("property"))
                while self.accept_op(","):
                    fields.append(self.ident("property"))
            self.expect_op(")")
            return A.CreateIndex(is_edge, name, schema, tuple(fields), ine, span=sp)
        ine = self.if_not_exists()
        name = self.ident("tag or edge type name")
        self.expect_op("(")
        props = []
        if not self.at_op(")"):
            props.append(self.prop_spec())
            while self.accept_op(","):
                props.append(self.prop_spec())
        self.expect_op(")")
        return A.CreateSchema(is_edge, name, tuple(props), ine, span=sp)

    def prop_spec(self) -> A.PropSpec:
        sp = self.span()
        name = self.ident("property name")
        if self.tok.kind != WORD:
            raise self.error("property type")
        ptype = self.advance().value.lower()
        if self.accept_op("("):
            ptype = f"{ptype}({self.int_lit()})"
            self.expect_op(")")
        nullable = None
        default = None
        while True:
            if self.accept_kw("NOT"):
                self.expect_kw("NULL")
                nullable = False
            elif self.accept_kw("NULL"):
                nullable = True
            elif self.accept_kw("DEFAULT"):
                default = self.unary()
            else:
                break
        return A.PropSpec(name, ptype, nullable, default, span=sp)

    def alter(self) -> A.AlterSchema:
        sp = self.span()
        self.expect_kw("ALTER")
        is_edge = self.expect_kw("TAG", "EDGE").upper == "EDGE"
        name = self.ident("tag or edge type name")
        clauses = []
        while True:
            action = self.expect_kw("ADD", "DROP", "CHANGE").upper
            self.expect_op("(")
            items = []
            if action == "DROP":
                items.append(self.ident("property"))
                while self.accept_op(","):
                    items.append(self.ident("property"))
            else:
                items.append(self.prop_spec())
                while self.accept_op(","):
                    items.append(self.prop_spec())
            self.expect_op(")")
            clauses.append((action, tuple(items)))
            if not self.accept_op(","):
                break
        return A.AlterSchema(is_edge, name, tuple(clauses), span=sp)

    def drop(self) -> A.Stmt:
        sp = self.span()
        self.expect_kw("DROP")
        if self.accept_kw("SPACE"):
            ie = self.if_exists()
            return A.DropSpace(self.ident("space name"), ie, span=sp)
        if self.accept_kw("USER"):
            ie = self.if_exists()
            return A.DropUser(self.ident("user name"), ie, span=sp)
        if self.accept_kw("HOSTS", "HOST"):
            return A.DropHosts(self.host_list(), span=sp)
        is_edge = self.expect_kw("TAG", "EDGE").upper == "EDGE"
        if self.accept_kw("INDEX"):
            ie = self.if_exists()
            return A.DropIndex(is_edge, self.ident("index name"), ie, span=sp)
        ie = self.if_exists()
        return A.DropSchema(is_edge, self.ident("tag or edge type name"), ie, span=sp)

    def show(self) -> A.Show:
        sp = self.span()
        self.expect_kw("SHOW")
        w = self.expect_kw("SPACES", "TAGS", "EDGES", "TAG", "EDGE", "HOSTS", "PARTS", "USERS", "SLOW", "QUERIES").upper
        if w in ("TAG", "EDGE"):
            self.expect_kw("INDEXES")
            w = f"{w}_INDEXES"
        elif w == "SLOW":
            self.expect_kw("QUERIES")
            w = "SLOW_QUERIES"
        return A.Show(w, span=sp)

    def describe(self) -> A.Describe:
        sp = self.span()
        self.expect_kw("DESCRIBE", "DESC")
        w = self.expect_kw("SPACE", "TAG", "EDGE").upper
        if w != "SPACE" and self.accept_kw("INDEX"):
            w = f"{w}_INDEX"
        return A.Describe(w, self.ident("name"), span=sp)

    def rebuild(self) -> A.RebuildIndex:
        sp = self.span()
        self.expect_kw("REBUILD")
        is_edge = self.expect_kw("TAG", "EDGE").upper == "EDGE"
        self.expect_kw("INDEX")
        names = [self.ident("index name")]
        while self.accept_op(","):
            names.append(self.ident("index name"))
        return A.RebuildIndex(is_edge, tuple(names), span=sp)

    # -- dml -------------------------------------------------------------
    def insert(self) -> A.Stmt:
        sp = self.span()
        self.expect_kw("INSERT")
        if self.accept_kw("VERTEX", "VERTICES"):
            ine = self.if_not_exists()
            ignore = bool(self.accept_kw("IGNORE_EXISTED_INDEX"))
            tags = [self.schema_props()]
            while self.accept_op(","):
                tags.append(self.schema_props())
            self.expect_kw("VALUES")
            rows = [self.vertex_row()]
            while self.accept_op(","):
                rows.append(self.vertex_row())
            return A.InsertVertex(tuple(tags), tuple(rows), ine, ignore, span=sp)
        self.expect_kw("EDGE")
        ine = self.if_not_exists()
        edge, props = self.schema_props()
        self.expect_kw("VALUES")
        rows = [self.edge_row()]
        while self.accept_op(","):
            rows.append(self.edge_row())
        return A.InsertEdge(edge, props, tuple(rows), ine, span=sp)

    def schema_props(self) -> tuple:
        name = self.ident("tag or edge type")
        self.expect_op("(")
        props = []
        if not self.at_op(")"):
            props.append(self.ident("property"))
            while self.accept_op(","):
                props.append(self.ident("property"))
        self.expect_op(")")
        return name, tuple(props)

    def value_list(self) -> tuple:
        self.expect_op("(")
        vals = []
        if not self.at_op(")"):
            vals.append(self.expr())
            while self.accept_op(","):
                vals.append(self.expr())
        self.expect_op(")")
        return tuple(vals)

    def vertex_row(self) -> tuple:
        vid = self.additive()
        self.expect_op(":")
        return vid, self.value_list()

    def edge_row(self) -> tuple:
        ref = self.edge_ref()
        self.expect_op(":")
        return ref, self.value_list()

    def delete(self) -> A.Stmt:
        sp = self.span()
        self.expect_kw("DELETE")
        if self.accept_kw("VERTEX", "VERTICES"):
            vids = [self.additive()]
            while self.accept_op(","):
                vids.append(self.additive())
            with_edge = False
            if self.accept_kw("WITH"):
                self.expect_kw("EDGE")
                with_edge = True
            return A.DeleteVertex(tuple(vids), with_edge, span=sp)
        self.expect_kw("EDGE")
        edge = self.ident("edge type")
        refs = [self.edge_ref()]
        while self.accept_op(","):
            refs.append(self.edge_ref())
        return A.DeleteEdge(edge, tuple(refs), span=sp)

    # -- admin -----------------------------------------------------------
    def host_list(self) -> tuple:
        hosts = [self.host()]
        while self.accept_op(","):
            hosts.append(self.host())
        return tuple(hosts)

    def host(self) -> str:
        if self.tok.kind == STRING:
            h = self.advance().value
        else:
            h = self.ident("host")
        if self.accept_op(":"):
            h = f"{h}:{self.int_lit()}"
        return h

    def add_hosts(self) -> A.AddHosts:
        sp = self.span()
        self.expect_kw("ADD")
        self.expect_kw("HOSTS", "HOST")
        return A.AddHosts(self.host_list(), span=sp)

    def balance(self) -> A.BalanceData:
        sp = self.span()
        self.expect_kw("BALANCE")
        self.expect_kw("DATA")
        return A.BalanceData(span=sp)

    def grant(self) -> A.Grant:
        sp = self.span()
        revoke = self.expect_kw("GRANT", "REVOKE").upper == "REVOKE"
        self.accept_kw("ROLE")
        role = self.ident("role").upper()
        self.expect_kw("ON")
        space = self.ident("space")
        self.expect_kw("FROM" if revoke else "TO")
        return A.Grant(role, space, self.ident("user"), revoke, span=sp)

    def change_password(self) -> A.ChangePassword:
        sp = self.span()
        self.expect_kw("CHANGE")
        self.expect_kw("PASSWORD")
        user = self.ident("user")
        self.expect_kw("FROM")
        old = self.string_lit()
        self.expect_kw("TO")
        return A.ChangePassword(user, old, self.string_lit(), span=sp)

    def kill(self) -> A.KillQuery:
        sp = self.span()
        self.expect_kw("KILL")
        self.expect_kw("QUERY")
        if self.accept_op("("):
            self.ident("session")
            self.expect_op("=")
            qid = self.string_lit() if self.tok.kind == STRING else str(self.int_lit())
            self.expect_op(")")
            return A.KillQuery(qid, span=sp)
        return A.KillQuery(self.string_lit(), span=sp)

    # -- expressions -----------------------------------------------------
    def expr(self) -> A.Expr:
        return self.or_expr()

    def or_expr(self) -> A.Expr:
        left = self.xor_expr()
        while self.at_kw("OR"):
            sp = self.span()
            self.advance()
            left = A.Binary("OR", left, self.xor_expr(), span=sp)
        return left

    def xor_expr(self) -> A.Expr:
        left = self.and_expr()
        while self.at_kw("XOR"):
            sp = self.span()
            self.advance()
            left = A.Binary("XOR", left, self.and_expr(), span=sp)
        return left

    def and_expr(self) -> A.Expr:
        left = self.not_expr()
        while self.at_kw("AND"):
            sp = self.span()
            self.advance()
            left = A.Binary("AND", left, self.not_expr(), span=sp)
        return left

    def not_expr(self) -> A.Expr:
        if self.at_kw("NOT"):
            sp = self.span()
            self.advance()
            return A.Unary("NOT", self.not_expr(), span=sp)
        return self.comparison()

    def comparison(self) -> A.Expr:
        left = self.additive()
        while True:
            sp = self.span()
            if self.tok.kind == OP and self.tok.value in _COMPARE:
                op = self.advance().value
                op = "!=" if op == "<>" else op
                left = A.Binary(op, left, self.additive(), span=sp)
            elif self.at_kw("IN"):
                self.advance()
                left = A.Binary("IN", left, self.additive(), span=sp)
            elif self.at_kw("NOT") and self.peek().kind == WORD and self.peek().upper == "IN":
                self.advance()
                self.advance()
                left = A.Unary("NOT", A.Binary("IN", left, self.additive(), span=sp), span=sp)
            elif self.at_kw("CONTAINS"):
                self.advance()
                left = A.Binary("CONTAINS", left, self.additive(), span=sp)
            else:
                return left

    def additive(self) -> A.Expr:
        left = self.multiplicative()
        while self.at_op("+", "-"):
            sp = self.span()
            op = self.advance().value
            left = A.Binary(op, left, self.multiplicative(), span=sp)
        return left

    def multiplicative(self) -> A.Expr:
        left = self.unary()
        while self.at_op("*", "/", "%"):
            sp = self.span()
            op = self.advance().value
            left = A.Binary(op, left, self.unary(), span=sp)
        return left

    def unary(self) -> A.Expr:
        if self.at_op("-"):
            sp = self.span()
            self.advance()
            operand = self.unary()
            if isinstance(operand, A.Literal) and type(operand.value) in (int, float):
                return A.Literal(-operand.value, span=sp)
            return A.Unary("-", operand, span=sp)
        if self.at_op("+"):
            self.advance()
            return self.unary()
        return self.primary()

    def primary(self) -> A.Expr:
        t = self.tok
        sp = self.span()
        if t.kind in (INT, FLOAT, STRING):
            self.advance()
            return A.Literal(t.value, span=sp)
        if t.kind == OP:
            if t.value == "(":
                self.advance()
                e = self.expr()
                self.expect_op(")")
                return e
            if t.value == "[":
                self.advance()
                items = []
                if not self.at_op("]"):
                    items.append(self.expr())
                    while self.accept_op(","):
                        items.append(self.expr())
                self.expect_op("]")
                return A.ListExpr(tuple(items), span=sp)
            if t.value == "$-":
                self.advance()
                self.expect_op(".")
                return A.InputProp(self.ident("column"), span=sp)
            if t.value in ("$^", "$$"):
                self.advance()
                which = "src" if t.value == "$^" else "dst"
                if self.accept_op("."):
                    tag = self.ident("tag")
                    self.expect_op(".")
                    return A.VertexProp(which, tag, self.ident("property"), span=sp)
                return A.Special(t.value, span=sp)
            raise self.error("expression")
        if t.kind == WORD:
            up = t.upper
            if up == "TRUE" or up == "FALSE":
                self.advance()
                return A.Literal(up == "TRUE", span=sp)
            if up == "NULL":
                self.advance()
                return A.Literal(None, span=sp)
            if up in ("EDGE", "VERTEX") and not (self.peek().kind == OP and self.peek().value in (".", "(")):
                self.advance()
                return A.Special(up, span=sp)
        if self.at_ident():
            name = self.ident()
            if self.at_op("("):
                self.advance()
                fname = name.lower()
                distinct = bool(self.accept_kw("DISTINCT"))
                args = []
                if self.accept_op("*"):
                    args.append(A.Star(span=sp))
                elif not self.at_op(")"):
                    args.append(self.expr())
                    while self.accept_op(","):
                        args.append(self.expr())
                self.expect_op(")")
                return A.FuncCall(fname, tuple(args), distinct, span=sp)
            if self.accept_op("."):
                return A.LabelProp(name, self.ident("property"), span=sp)
            return A.Label(name, span=sp)
        raise self.error("expression")


def parse(text: str) -> A.Stmt:
    return Parser(text).parse_statement()


def parse_script(text: str) -> list[A.Stmt]:
    return Parser(text).parse_script()


def parse_expr(text: str) -> A.Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != EOF:
        raise p.error("end of expression")
    return e
