//! Recursive-descent parser producing a surface syntax tree that still
//! carries aliases and literal positions. Normalization happens afterwards.

use super::lexer::{lex, Tok, Token};
use super::{AggFunc, ArithOp, CmpOp, Direction, ParseError, SetOp};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum RawExpr {
    Column { qualifier: Option<String>, name: String },
    Star { qualifier: Option<String> },
    Literal,
    Agg { func: AggFunc, distinct: bool, arg: Box<RawExpr> },
    Func { name: String, args: Vec<RawExpr> },
    Binary { op: ArithOp, lhs: Box<RawExpr>, rhs: Box<RawExpr> },
    Neg(Box<RawExpr>),
    Subquery(Box<RawSelect>),
    /// Parenthesized literal list of an `IN`.
    List(Vec<RawExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct RawPred {
    pub negated: bool,
    pub op: CmpOp,
    pub lhs: RawExpr,
    pub rhs: Vec<RawExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum RawCond {
    And(Box<RawCond>, Box<RawCond>),
    Or(Box<RawCond>, Box<RawCond>),
    Not(Box<RawCond>),
    Pred(RawPred),
}

#[derive(Debug, Clone, PartialEq)]
pub(super) enum RawTable {
    Named { name: String, alias: Option<String> },
    Derived { query: Box<RawSelect>, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub(super) struct RawSelect {
    pub distinct: bool,
    pub items: Vec<(RawExpr, Option<String>)>,
    pub tables: Vec<RawTable>,
    pub join_conds: Vec<RawCond>,
    pub where_: Option<RawCond>,
    pub group_by: Vec<RawExpr>,
    pub having: Option<RawCond>,
    pub order_by: Vec<(RawExpr, Direction)>,
    pub limit: bool,
    pub set_op: Option<(SetOp, Box<RawSelect>)>,
}

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset", "union", "intersect",
    "except", "all", "distinct", "as", "on", "using", "join", "inner", "left", "right", "outer", "cross",
    "full", "natural", "and", "or", "not", "in", "like", "glob", "between", "is", "null", "exists", "asc",
    "desc", "case", "when", "then", "else", "end",
];

pub(super) fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

pub(super) fn parse(src: &str) -> Result<RawSelect, ParseError> {
    let mut p = Parser {
        src,
        toks: lex(src)?,
        pos: 0,
    };
    let q = p.query()?;
    p.accept_sym(";");
    p.expect_eof()?;
    Ok(q)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        let found = match t.tok {
            Tok::Eof => "end of input".to_string(),
            _ => format!("{:?}", &self.src[t.start..t.end]),
        };
        ParseError {
            offset: t.start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw))
    }

    fn accept_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.accept_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&[&kw.to_ascii_uppercase()]))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn accept_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.accept_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("'{s}'")]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    /// Any identifier that is not a reserved word (quoted ones always qualify).
    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident { text, quoted } if quoted || !is_reserved(&text) => {
                self.bump();
                Ok(text)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn is_plain_ident(&self) -> bool {
        matches!(self.peek(), Tok::Ident { text, quoted } if *quoted || !is_reserved(text))
    }

    fn starts_query(&self) -> bool {
        self.is_kw("select") || (self.is_sym("(") && self.paren_starts_query(0))
    }

    fn paren_starts_query(&self, n: usize) -> bool {
        let mut k = n;
        while matches!(self.peek_at(k), Tok::Sym("(")) {
            k += 1;
        }
        self.is_kw_at(k, "select")
    }

    fn query(&mut self) -> Result<RawSelect, ParseError> {
        let mut core = if self.is_sym("(") && self.paren_starts_query(0) {
            self.bump();
            let inner = self.query()?;
            self.expect_sym(")")?;
            inner
        } else {
            self.select_core()?
        };
        let op = if self.accept_kw("union") {
            Some(if self.accept_kw("all") { SetOp::UnionAll } else { SetOp::Union })
        } else if self.accept_kw("intersect") {
            Some(SetOp::Intersect)
        } else if self.accept_kw("except") {
            Some(SetOp::Except)
        } else {
            None
        };
        if let Some(op) = op {
            let rhs = self.query()?;
            // Attach at the end of an existing chain.
            let mut slot = &mut core;
            while slot.set_op.is_some() {
                slot = slot.set_op.as_mut().map(|(_, r)| r.as_mut()).expect("checked");
            }
            slot.set_op = Some((op, Box::new(rhs)));
        }
        Ok(core)
    }

    fn select_core(&mut self) -> Result<RawSelect, ParseError> {
        self.expect_kw("select")?;
        let distinct = self.accept_kw("distinct");
        if !distinct {
            self.accept_kw("all");
        }
        let mut items = Vec::new();
        loop {
            let e = self.expr()?;
            let alias = if self.accept_kw("as") {
                Some(self.alias_name()?)
            } else if self.is_plain_ident() || matches!(self.peek(), Tok::Str) {
                Some(self.alias_name()?)
            } else {
                None
            };
            items.push((e, alias));
            if !self.accept_sym(",") {
                break;
            }
        }
        let mut q = RawSelect {
            distinct,
            items,
            tables: Vec::new(),
            join_conds: Vec::new(),
            where_: None,
            group_by: Vec::new(),
            having: None,
            order_by: Vec::new(),
            limit: false,
            set_op: None,
        };
        if self.accept_kw("from") {
            self.from_clause(&mut q)?;
        }
        if self.accept_kw("where") {
            q.where_ = Some(self.cond()?);
        }
        if self.accept_kw("group") {
            self.expect_kw("by")?;
            loop {
                q.group_by.push(self.expr()?);
                if !self.accept_sym(",") {
                    break;
                }
            }
        }
        if self.accept_kw("having") {
            q.having = Some(self.cond()?);
        }
        if self.accept_kw("order") {
            self.expect_kw("by")?;
            loop {
                let e = self.expr()?;
                let dir = if self.accept_kw("desc") {
                    Direction::Desc
                } else {
                    self.accept_kw("asc");
                    Direction::Asc
                };
                q.order_by.push((e, dir));
                if !self.accept_sym(",") {
                    break;
                }
            }
        }
        if self.accept_kw("limit") {
            self.expr()?;
            if self.accept_kw("offset") || self.accept_sym(",") {
                self.expr()?;
            }
            q.limit = true;
        }
        Ok(q)
    }

    fn alias_name(&mut self) -> Result<String, ParseError> {
        if matches!(self.peek(), Tok::Str) {
            let (start, end) = (self.toks[self.pos].start, self.toks[self.pos].end);
            self.bump();
            let s = &self.src[start + 1..end - 1];
            return Ok(s.to_string());
        }
        self.ident("alias")
    }

    fn table_ref(&mut self) -> Result<RawTable, ParseError> {
        if self.is_sym("(") && self.paren_starts_query(0) {
            self.bump();
            let query = Box::new(self.query()?);
            self.expect_sym(")")?;
            let alias = self.opt_alias()?;
            return Ok(RawTable::Derived { query, alias });
        }
        let mut name = self.ident("table name")?;
        // schema.table: keep the table part.
        if self.is_sym(".") && matches!(self.peek_at(1), Tok::Ident { .. }) {
            self.bump();
            name = self.ident("table name")?;
        }
        let alias = self.opt_alias()?;
        Ok(RawTable::Named { name, alias })
    }

    fn opt_alias(&mut self) -> Result<Option<String>, ParseError> {
        if self.accept_kw("as") {
            return Ok(Some(self.ident("alias")?));
        }
        if self.is_plain_ident() {
            return Ok(Some(self.ident("alias")?));
        }
        Ok(None)
    }

    fn from_clause(&mut self, q: &mut RawSelect) -> Result<(), ParseError> {
        q.tables.push(self.table_ref()?);
        loop {
            if self.accept_sym(",") {
                q.tables.push(self.table_ref()?);
                continue;
            }
            let natural = self.accept_kw("natural");
            let joined = if self.accept_kw("join") {
                true
            } else if self.accept_kw("inner") || self.accept_kw("cross") {
                self.expect_kw("join")?;
                true
            } else if self.accept_kw("left") || self.accept_kw("right") || self.accept_kw("full") {
                self.accept_kw("outer");
                self.expect_kw("join")?;
                true
            } else {
                false
            };
            if !joined {
                if natural {
                    return Err(self.error(&["JOIN"]));
                }
                break;
            }
            q.tables.push(self.table_ref()?);
            if self.accept_kw("on") {
                q.join_conds.push(self.cond()?);
            } else if self.accept_kw("using") {
                self.expect_sym("(")?;
                loop {
                    self.ident("column name")?;
                    if !self.accept_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
            }
        }
        Ok(())
    }

    fn cond(&mut self) -> Result<RawCond, ParseError> {
        let mut lhs = self.and_cond()?;
        while self.accept_kw("or") {
            let rhs = self.and_cond()?;
            lhs = RawCond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_cond(&mut self) -> Result<RawCond, ParseError> {
        let mut lhs = self.not_cond()?;
        while self.accept_kw("and") {
            let rhs = self.not_cond()?;
            lhs = RawCond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_cond(&mut self) -> Result<RawCond, ParseError> {
        if self.is_kw("not") && !self.is_kw_at(1, "exists") {
            self.bump();
            return Ok(RawCond::Not(Box::new(self.not_cond()?)));
        }
        // `( cond )`, unless the parenthesis turns out to be an operand.
        if self.is_sym("(") && !self.paren_starts_query(0) {
            let save = self.pos;
            self.bump();
            if let Ok(inner) = self.cond() {
                if self.accept_sym(")") && self.at_cond_boundary() {
                    return Ok(inner);
                }
            }
            self.pos = save;
        }
        self.predicate().map(RawCond::Pred)
    }

    fn at_cond_boundary(&self) -> bool {
        match self.peek() {
            Tok::Eof => true,
            Tok::Sym(s) => matches!(*s, ")" | ";"),
            Tok::Ident { text, quoted: false } => [
                "and", "or", "group", "having", "order", "limit", "union", "intersect", "except", "join",
                "inner", "left", "right", "full", "cross", "natural", "where",
            ]
            .iter()
            .any(|k| k.eq_ignore_ascii_case(text)),
            _ => false,
        }
    }

    fn predicate(&mut self) -> Result<RawPred, ParseError> {
        let negated_exists = self.is_kw("not") && self.is_kw_at(1, "exists");
        if negated_exists {
            self.bump();
        }
        if self.accept_kw("exists") {
            self.expect_sym("(")?;
            let q = self.query()?;
            self.expect_sym(")")?;
            return Ok(RawPred {
                negated: negated_exists,
                op: CmpOp::Exists,
                lhs: RawExpr::Subquery(Box::new(q)),
                rhs: Vec::new(),
            });
        }
        let lhs = self.expr()?;
        let negated = self.accept_kw("not");
        if self.accept_kw("between") {
            let lo = self.expr()?;
            self.expect_kw("and")?;
            let hi = self.expr()?;
            return Ok(RawPred { negated, op: CmpOp::Between, lhs, rhs: vec![lo, hi] });
        }
        if self.accept_kw("in") {
            self.expect_sym("(")?;
            let rhs = if self.starts_query() {
                RawExpr::Subquery(Box::new(self.query()?))
            } else {
                let mut items = vec![self.expr()?];
                while self.accept_sym(",") {
                    items.push(self.expr()?);
                }
                RawExpr::List(items)
            };
            self.expect_sym(")")?;
            return Ok(RawPred { negated, op: CmpOp::In, lhs, rhs: vec![rhs] });
        }
        if self.accept_kw("like") || self.accept_kw("glob") {
            let rhs = self.expr()?;
            return Ok(RawPred { negated, op: CmpOp::Like, lhs, rhs: vec![rhs] });
        }
        if negated {
            return Err(self.error(&["BETWEEN", "IN", "LIKE"]));
        }
        if self.accept_kw("is") {
            let negated = self.accept_kw("not");
            let rhs = self.expr()?;
            return Ok(RawPred { negated, op: CmpOp::Is, lhs, rhs: vec![rhs] });
        }
        let op = match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") | Tok::Sym("<>") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => {
                return Err(self.error(&[
                    "=", "!=", "<", ">", "<=", ">=", "BETWEEN", "IN", "LIKE", "IS",
                ]))
            }
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(RawPred { negated: false, op, lhs, rhs: vec![rhs] })
    }

    fn expr(&mut self) -> Result<RawExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => ArithOp::Add,
                Tok::Sym("-") => ArithOp::Sub,
                Tok::Sym("||") => ArithOp::Concat,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = RawExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<RawExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => ArithOp::Mul,
                Tok::Sym("/") => ArithOp::Div,
                Tok::Sym("%") => ArithOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = RawExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<RawExpr, ParseError> {
        if self.accept_sym("-") {
            return Ok(match self.unary()? {
                RawExpr::Literal => RawExpr::Literal,
                e => RawExpr::Neg(Box::new(e)),
            });
        }
        if self.accept_sym("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<RawExpr, ParseError> {
        const EXPECTED: &[&str] = &["expression", "column", "literal", "'('"];
        match self.peek().clone() {
            Tok::Number | Tok::Str | Tok::Sym("?") => {
                self.bump();
                Ok(RawExpr::Literal)
            }
            Tok::Sym("*") => {
                self.bump();
                Ok(RawExpr::Star { qualifier: None })
            }
            Tok::Sym("(") => {
                self.bump();
                let e = if self.starts_query() {
                    RawExpr::Subquery(Box::new(self.query()?))
                } else {
                    self.expr()?
                };
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident { text, quoted } => {
                if !quoted {
                    let lower = text.to_ascii_lowercase();
                    if matches!(lower.as_str(), "null" | "true" | "false") {
                        self.bump();
                        return Ok(RawExpr::Literal);
                    }
                    if is_reserved(&lower) {
                        return Err(self.error(EXPECTED));
                    }
                    if matches!(self.peek_at(1), Tok::Sym("(")) {
                        return self.call(lower);
                    }
                }
                self.bump();
                if self.accept_sym(".") {
                    if self.accept_sym("*") {
                        return Ok(RawExpr::Star { qualifier: Some(text) });
                    }
                    let name = self.ident("column name")?;
                    return Ok(RawExpr::Column { qualifier: Some(text), name });
                }
                Ok(RawExpr::Column { qualifier: None, name: text })
            }
            _ => Err(self.error(EXPECTED)),
        }
    }

    fn call(&mut self, name: String) -> Result<RawExpr, ParseError> {
        self.bump();
        self.expect_sym("(")?;
        let agg = match name.as_str() {
            "count" => Some(AggFunc::Count),
            "sum" => Some(AggFunc::Sum),
            "avg" => Some(AggFunc::Avg),
            "min" => Some(AggFunc::Min),
            "max" => Some(AggFunc::Max),
            _ => None,
        };
        let distinct = self.accept_kw("distinct");
        let mut args = Vec::new();
        if !self.is_sym(")") {
            loop {
                args.push(self.expr()?);
                if !self.accept_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        match agg {
            // min/max with several arguments are the scalar functions.
            Some(func) if args.len() == 1 => Ok(RawExpr::Agg {
                func,
                distinct,
                arg: Box::new(args.pop().expect("one arg")),
            }),
            Some(AggFunc::Count) if args.is_empty() => Ok(RawExpr::Agg {
                func: AggFunc::Count,
                distinct,
                arg: Box::new(RawExpr::Star { qualifier: None }),
            }),
            _ => Ok(RawExpr::Func { name, args }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_join_with_aliases() {
        let q = parse("SELECT T1.name FROM singer AS T1 JOIN concert T2 ON T1.id = T2.sid WHERE T2.year > 2014").unwrap();
        assert_eq!(q.tables.len(), 2);
        assert_eq!(q.join_conds.len(), 1);
        assert!(q.where_.is_some());
    }

    #[test]
    fn parenthesized_operand_is_not_a_condition() {
        let q = parse("SELECT a FROM t WHERE (a + b) * 2 > 3 AND (c = 1 OR d = 2)").unwrap();
        match q.where_.unwrap() {
            RawCond::And(l, r) => {
                assert!(matches!(*l, RawCond::Pred(RawPred { op: CmpOp::Gt, .. })));
                assert!(matches!(*r, RawCond::Or(..)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_offset_at_end() {
        let e = parse("SELECT * FROM").unwrap_err();
        assert_eq!(e.offset, 13);
        assert_eq!(e.found, "end of input");
        assert_eq!(e.expected, ["table name"]);
    }

    #[test]
    fn set_operations_chain() {
        let q = parse("SELECT a FROM t UNION SELECT a FROM u EXCEPT SELECT a FROM v").unwrap();
        let (op, rhs) = q.set_op.unwrap();
        assert_eq!(op, SetOp::Union);
        assert_eq!(rhs.set_op.unwrap().0, SetOp::Except);
    }

    #[test]
    fn rejects_trailing_garbage() {
        assert!(parse("SELECT a FROM t WHERE").is_err());
        assert!(parse("SELECT a FROM t t2 t3").is_err());
        assert!(parse("SELECT a FROM t; SELECT 1").is_err());
        assert!(parse("DELETE FROM t").is_err());
    }
}
