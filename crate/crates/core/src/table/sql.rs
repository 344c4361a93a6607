//! The supported SQL subset:
//!
//! ```text
//! SELECT * | item [, item]...
//!   FROM table
//!   [GROUP BY column [, column]...]
//!   [ORDER BY expr [ASC|DESC] [, ...]]
//!   [LIMIT n]
//!
//! item := expr [AS alias]
//! expr := term [+ term]...
//! term := SUM(expr) | column | integer | (expr)
//! column := name[.field]...
//! ```
//!
//! Keywords are case-insensitive. Joins, filters, subqueries and every other
//! construct are rejected with an explicit "unsupported" error.

use std::fmt;

use super::TableError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Column(String),
    Int(i64),
    Sum(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn has_aggregate(&self) -> bool {
        match self {
            Expr::Sum(_) => true,
            Expr::Add(a, b) => a.has_aggregate() || b.has_aggregate(),
            Expr::Column(_) | Expr::Int(_) => false,
        }
    }

    /// Columns referenced outside any aggregate.
    pub fn free_columns(&self) -> Vec<&str> {
        match self {
            Expr::Column(c) => vec![c.as_str()],
            Expr::Add(a, b) => {
                let mut v = a.free_columns();
                v.extend(b.free_columns());
                v
            }
            Expr::Sum(_) | Expr::Int(_) => Vec::new(),
        }
    }

    fn nested_aggregate(&self) -> bool {
        match self {
            Expr::Sum(inner) => inner.has_aggregate(),
            Expr::Add(a, b) => a.nested_aggregate() || b.nested_aggregate(),
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => f.write_str(c),
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Sum(e) => write!(f, "SUM({e})"),
            Expr::Add(a, b) => write!(f, "{a} + {b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl SelectItem {
    /// Output column name: the alias, or the expression text.
    pub fn name(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectList {
    Star,
    Items(Vec<SelectItem>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: Expr,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub select: SelectList,
    pub from: String,
    pub group_by: Vec<String>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

impl QueryAst {
    pub fn is_aggregate(&self) -> bool {
        !self.group_by.is_empty()
            || match &self.select {
                SelectList::Star => false,
                SelectList::Items(items) => items.iter().any(|i| i.expr.has_aggregate()),
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(i64),
    Str,
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

const SYMBOLS: [&str; 16] = ["<>", "<=", ">=", "!=", "||", "(", ")", ",", ".", "+", "-", "*", "/", "%", "=", ";"];

fn lex(text: &str) -> Result<Vec<Token>, TableError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), pos: start });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i].parse().map_err(|_| TableError::Syntax {
                position: start,
                message: format!("integer literal {} is out of range", &text[start..i]),
            })?;
            out.push(Token { tok: Tok::Number(n), pos: start });
        } else if c == b'\'' || c == b'"' || c == b'`' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != c {
                i += 1;
            }
            if i == bytes.len() {
                return Err(TableError::Syntax { position: start, message: "unterminated quoted literal".into() });
            }
            i += 1;
            out.push(Token { tok: Tok::Str, pos: start });
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            out.push(Token { tok: Tok::Sym(sym), pos: i });
            i += sym.len();
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(TableError::Syntax { position: i, message: format!("unexpected character {ch:?}") });
        }
    }
    out.push(Token { tok: Tok::Eof, pos: text.len() });
    Ok(out)
}

/// Words that end an expression or clause and cannot name a column.
const RESERVED: [&str; 12] = ["SELECT", "FROM", "GROUP", "BY", "ORDER", "LIMIT", "AS", "ASC", "DESC", "WHERE", "HAVING", "JOIN"];

/// Recognized SQL that the evaluator deliberately does not support.
const UNSUPPORTED_CLAUSES: [&str; 14] = [
    "WHERE", "HAVING", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "NATURAL", "UNION", "INTERSECT", "EXCEPT",
    "WINDOW", "OFFSET",
];
const UNSUPPORTED_EXPR: [&str; 8] = ["DISTINCT", "CASE", "SELECT", "NOT", "NULL", "CAST", "EXISTS", "OVER"];

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

/// Parses one query of the supported subset.
///
/// ```
/// use miniplex::table::parse_sql;
///
/// let ast = parse_sql("SELECT a, SUM(b) AS s FROM t GROUP BY a ORDER BY s DESC").unwrap();
/// assert_eq!(ast.group_by, ["a"]);
/// assert!(parse_sql("SELECT a FROM t JOIN u").is_err());
/// ```
pub fn parse_sql(text: &str) -> Result<QueryAst, TableError> {
    let mut p = Parser { tokens: lex(text)?, at: 0 };
    let ast = p.query()?;
    validate(&ast)?;
    Ok(ast)
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), TableError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {kw}")))
        }
    }

    fn eat_sym(&mut self, sym: &'static str) -> bool {
        if self.peek().tok == Tok::Sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &'static str) -> Result<(), TableError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected '{sym}'")))
        }
    }

    fn unexpected(&self, what: &str) -> TableError {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Number(n) => n.to_string(),
            Tok::Str => "quoted literal".to_string(),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".to_string(),
        };
        TableError::Syntax { position: t.pos, message: format!("{what}, found {found}") }
    }

    fn unsupported(&self, construct: impl Into<String>) -> TableError {
        TableError::Unsupported { position: self.peek().pos, construct: construct.into() }
    }

    /// Rejects a recognized but unsupported clause at the current position.
    fn reject_clause(&self) -> Result<(), TableError> {
        if let Tok::Ident(s) = &self.peek().tok {
            let upper = s.to_ascii_uppercase();
            if UNSUPPORTED_CLAUSES.contains(&upper.as_str()) {
                let name = match upper.as_str() {
                    "INNER" | "LEFT" | "RIGHT" | "FULL" | "CROSS" | "NATURAL" => "JOIN".to_string(),
                    _ => upper,
                };
                return Err(self.unsupported(name));
            }
        }
        Ok(())
    }

    fn identifier(&mut self, what: &str) -> Result<String, TableError> {
        match &self.peek().tok {
            Tok::Ident(s) if !RESERVED.contains(&s.to_ascii_uppercase().as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => {
                self.reject_clause()?;
                Err(self.unexpected(&format!("expected {what}")))
            }
        }
    }

    fn query(&mut self) -> Result<QueryAst, TableError> {
        if self.is_keyword("WITH") {
            return Err(self.unsupported("WITH"));
        }
        self.expect_keyword("SELECT")?;
        let select = if self.eat_sym("*") {
            SelectList::Star
        } else {
            let mut items = vec![self.select_item()?];
            while self.eat_sym(",") {
                items.push(self.select_item()?);
            }
            SelectList::Items(items)
        };

        self.reject_clause()?;
        self.expect_keyword("FROM")?;
        if self.peek().tok == Tok::Sym("(") || self.is_keyword("SELECT") {
            return Err(self.unsupported("subquery"));
        }
        let from = self.identifier("table name")?;
        if self.peek().tok == Tok::Sym(",") {
            return Err(self.unsupported("JOIN"));
        }
        if self.is_keyword("AS") || matches!(&self.peek().tok, Tok::Ident(s) if !is_clause_word(s)) {
            return Err(self.unsupported("table alias"));
        }

        let mut group_by = Vec::new();
        self.reject_clause()?;
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            group_by.push(self.column_path()?);
            while self.eat_sym(",") {
                group_by.push(self.column_path()?);
            }
        }

        let mut order_by = Vec::new();
        self.reject_clause()?;
        if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_keyword("DESC") {
                    true
                } else {
                    self.eat_keyword("ASC");
                    false
                };
                order_by.push(OrderItem { expr, descending });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }

        self.reject_clause()?;
        let limit = if self.eat_keyword("LIMIT") {
            match self.peek().tok {
                Tok::Number(n) => {
                    self.bump();
                    Some(n as u64)
                }
                _ => return Err(self.unexpected("expected a row count after LIMIT")),
            }
        } else {
            None
        };

        self.reject_clause()?;
        self.eat_sym(";");
        if self.peek().tok != Tok::Eof {
            return Err(self.unexpected("expected end of query"));
        }
        Ok(QueryAst { select, from, group_by, order_by, limit })
    }

    fn select_item(&mut self) -> Result<SelectItem, TableError> {
        let expr = self.expr()?;
        let alias = if self.eat_keyword("AS") { Some(self.identifier("alias")?) } else { None };
        Ok(SelectItem { expr, alias })
    }

    fn expr(&mut self) -> Result<Expr, TableError> {
        let mut left = self.term()?;
        loop {
            if self.eat_sym("+") {
                let right = self.term()?;
                left = Expr::Add(Box::new(left), Box::new(right));
                continue;
            }
            if let Tok::Sym(op) = self.peek().tok {
                if ["-", "*", "/", "%", "||", "=", "<>", "<=", ">=", "!="].contains(&op) {
                    return Err(self.unsupported(format!("operator {op}")));
                }
            }
            if self.is_keyword("LIKE") || self.is_keyword("IN") || self.is_keyword("AND") || self.is_keyword("OR") {
                if let Tok::Ident(s) = &self.peek().tok {
                    return Err(self.unsupported(s.to_ascii_uppercase()));
                }
            }
            return Ok(left);
        }
    }

    fn term(&mut self) -> Result<Expr, TableError> {
        match self.peek().tok.clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.is_keyword("SELECT") {
                    return Err(self.unsupported("subquery"));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Str => Err(self.unsupported("string literal")),
            Tok::Ident(name) => {
                let upper = name.to_ascii_uppercase();
                let is_call = self.tokens.get(self.at + 1).is_some_and(|t| t.tok == Tok::Sym("("));
                if is_call {
                    if upper == "SUM" {
                        self.bump();
                        self.bump();
                        if self.is_keyword("DISTINCT") {
                            return Err(self.unsupported("DISTINCT"));
                        }
                        let inner = self.expr()?;
                        self.expect_sym(")")?;
                        return Ok(Expr::Sum(Box::new(inner)));
                    }
                    let kind = if ["COUNT", "AVG", "MIN", "MAX"].contains(&upper.as_str()) {
                        "aggregate"
                    } else {
                        "function"
                    };
                    return Err(self.unsupported(format!("{kind} {upper}")));
                }
                if UNSUPPORTED_EXPR.contains(&upper.as_str()) {
                    return Err(self.unsupported(upper));
                }
                Ok(Expr::Column(self.column_path()?))
            }
            _ => Err(self.unexpected("expected an expression")),
        }
    }

    fn column_path(&mut self) -> Result<String, TableError> {
        let mut path = self.identifier("column name")?;
        while self.eat_sym(".") {
            path.push('.');
            path.push_str(&self.identifier("field name")?);
        }
        Ok(path)
    }
}

fn is_clause_word(s: &str) -> bool {
    let upper = s.to_ascii_uppercase();
    RESERVED.contains(&upper.as_str()) || UNSUPPORTED_CLAUSES.contains(&upper.as_str())
}

fn validate(ast: &QueryAst) -> Result<(), TableError> {
    let SelectList::Items(items) = &ast.select else {
        if ast.is_aggregate() {
            return Err(TableError::InvalidQuery("SELECT * cannot be combined with GROUP BY".into()));
        }
        return Ok(());
    };
    for item in items {
        if item.expr.nested_aggregate() {
            return Err(TableError::InvalidQuery(format!("nested aggregate in {}", item.expr)));
        }
    }
    if ast.is_aggregate() {
        for item in items {
            for col in item.expr.free_columns() {
                if !ast.group_by.iter().any(|g| g.eq_ignore_ascii_case(col)) {
                    return Err(TableError::InvalidQuery(format!(
                        "{col} must appear in GROUP BY or inside an aggregate"
                    )));
                }
            }
        }
    }
    let mut names: Vec<String> = items.iter().map(|i| i.name().to_ascii_lowercase()).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(TableError::InvalidQuery(format!("duplicate output column {}", w[0])));
    }
    Ok(())
}
