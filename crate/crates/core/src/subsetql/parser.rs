//! Lexer and recursive-descent parser for the subset query language.
//!
//! ```text
//! expr    := or
//! or      := and ("OR" and)*
//! and     := unary ("AND" unary)*
//! unary   := "NOT" unary | primary
//! primary := "(" expr ")"
//!          | "ids" "(" string ("," string)* ")"
//!          | "last_days" "(" field "," integer ")"
//!          | field op literal
//!          | field "IN" "(" literal ("," literal)* ")"
//! ```
//!
//! Keywords are case-insensitive. `#` starts a comment running to the end of
//! the line.

use std::fmt;

use chrono::NaiveDate;

use super::ast::{check_comparison, CmpOp, Expr, Field, FieldType, Literal};
use crate::corpus::normalize_concept;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownField(String),
    TypeMismatch(String),
}

/// A parse failure with the 1-based position of the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub token: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}")?,
            ParseErrorKind::UnknownField(name) => write!(
                f,
                "unknown field `{name}` (expected one of: {})",
                Field::ALL.map(Field::name).join(", ")
            )?,
            ParseErrorKind::TypeMismatch(msg) => f.write_str(msg)?,
        }
        if !self.token.is_empty() {
            write!(f, " (at `{}`)", self.token)?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Date(NaiveDate),
    LParen,
    RParen,
    Comma,
    Op(CmpOp),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(
        &self,
        line: usize,
        column: usize,
        token: String,
        msg: impl Into<String>,
    ) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax(msg.into()),
            line,
            column,
            token,
        }
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.chars.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while self.chars.peek().is_some_and(|&c| c != '\n') {
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(c) = self.bump() else {
                out.push(Token {
                    tok: Tok::Eof,
                    text: String::new(),
                    line,
                    column,
                });
                return Ok(out);
            };
            let mut text = c.to_string();
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '=' | '!' | '<' | '>' => {
                    let eq = self.chars.peek() == Some(&'=');
                    if eq {
                        self.bump();
                        text.push('=');
                    }
                    match (c, eq) {
                        ('=', true) => Tok::Op(CmpOp::Eq),
                        ('!', true) => Tok::Op(CmpOp::Ne),
                        ('<', true) => Tok::Op(CmpOp::Le),
                        ('>', true) => Tok::Op(CmpOp::Ge),
                        ('<', false) => Tok::Op(CmpOp::Lt),
                        ('>', false) => Tok::Op(CmpOp::Gt),
                        _ => {
                            return Err(self.error(
                                line,
                                column,
                                text,
                                "expected one of == != < <= > >=",
                            ))
                        }
                    }
                }
                '"' | '\'' => {
                    let mut value = String::new();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(self.error(line, column, text, "unterminated string"))
                            }
                            Some(q) if q == c => {
                                text.push(q);
                                break;
                            }
                            Some('\\') => {
                                let esc = self.bump();
                                text.push('\\');
                                match esc {
                                    Some('n') => value.push('\n'),
                                    Some('t') => value.push('\t'),
                                    Some(e @ ('"' | '\'' | '\\')) => value.push(e),
                                    Some(e) => {
                                        text.push(e);
                                        return Err(self.error(
                                            line,
                                            column,
                                            text,
                                            format!("unknown escape `\\{e}`"),
                                        ));
                                    }
                                    None => {
                                        return Err(self.error(
                                            line,
                                            column,
                                            text,
                                            "unterminated string",
                                        ))
                                    }
                                }
                                if let Some(e) = esc {
                                    text.push(e);
                                }
                            }
                            Some(ch) => {
                                text.push(ch);
                                value.push(ch);
                            }
                        }
                    }
                    Tok::Str(value)
                }
                c if c.is_ascii_digit()
                    || (c == '-' && self.chars.peek().is_some_and(|d| d.is_ascii_digit())) =>
                {
                    while let Some(&d) = self.chars.peek() {
                        if d.is_ascii_alphanumeric() || d == '-' || d == '_' {
                            text.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if text.len() == 10 && text.as_bytes()[4] == b'-' {
                        match NaiveDate::parse_from_str(&text, "%Y-%m-%d") {
                            Ok(d) => Tok::Date(d),
                            Err(_) => {
                                return Err(self.error(
                                    line,
                                    column,
                                    text,
                                    "invalid date (expected YYYY-MM-DD)",
                                ))
                            }
                        }
                    } else {
                        match text.parse::<i64>() {
                            Ok(i) => Tok::Int(i),
                            Err(_) => return Err(self.error(line, column, text, "invalid number")),
                        }
                    }
                }
                c if c.is_alphabetic() || c == '_' => {
                    while let Some(&d) = self.chars.peek() {
                        if d.is_alphanumeric() || d == '_' {
                            text.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(text.clone())
                }
                _ => return Err(self.error(line, column, text, "unexpected character")),
            };
            out.push(Token {
                tok,
                text,
                line,
                column,
            });
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at(t: &Token, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            line: t.line,
            column: t.column,
            token: t.text.clone(),
        }
    }

    fn syntax(t: &Token, msg: impl Into<String>) -> ParseError {
        Self::err_at(t, ParseErrorKind::Syntax(msg.into()))
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(Self::syntax(&t, format!("expected {what}")))
        }
    }

    fn parse_or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.keyword("OR") {
            self.next();
            lhs = lhs.or(self.parse_and()?);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        while self.keyword("AND") {
            self.next();
            lhs = lhs.and(self.parse_unary()?);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if self.keyword("NOT") {
            self.next();
            return Ok(self.parse_unary()?.not());
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::LParen => {
                let e = self.parse_or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "ids" && self.peek().tok == Tok::LParen => {
                self.next();
                let values = self.parse_list()?;
                let ids = values
                    .into_iter()
                    .map(|(tok, lit)| match lit {
                        Literal::Str(s) => Ok(s),
                        _ => Err(Self::err_at(
                            &tok,
                            ParseErrorKind::TypeMismatch(
                                "type mismatch: ids() takes string literals".into(),
                            ),
                        )),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Expr::Ids(ids))
            }
            Tok::Ident(name) if name == "last_days" && self.peek().tok == Tok::LParen => {
                self.next();
                let ft = self.next();
                let field = self.field(&ft)?;
                if field.field_type() != FieldType::Date {
                    return Err(Self::err_at(
                        &ft,
                        ParseErrorKind::TypeMismatch(format!(
                            "type mismatch: last_days needs a date field, `{field}` is not one"
                        )),
                    ));
                }
                self.expect(Tok::Comma, "`,`")?;
                let nt = self.next();
                let days = match nt.tok {
                    Tok::Int(n) => u32::try_from(n).map_err(|_| {
                        Self::syntax(&nt, "day count must be a non-negative integer")
                    })?,
                    _ => return Err(Self::syntax(&nt, "expected a day count")),
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::LastDays { field, days })
            }
            Tok::Ident(_) => {
                let field = self.field(&t)?;
                if self.keyword("IN") {
                    self.next();
                    self.expect(Tok::LParen, "`(`")?;
                    let values = self
                        .parse_list()?
                        .into_iter()
                        .map(|(tok, lit)| Self::typed_literal(field, CmpOp::Eq, &tok, lit))
                        .collect::<Result<Vec<_>, _>>()?;
                    return Ok(Expr::In { field, values });
                }
                let op_tok = self.next();
                let Tok::Op(op) = op_tok.tok else {
                    return Err(Self::syntax(
                        &op_tok,
                        "expected a comparison operator or IN",
                    ));
                };
                let lt = self.next();
                let lit = Self::literal(&lt)?;
                let value = Self::typed_literal(field, op, &lt, lit)?;
                Ok(Expr::Compare { field, op, value })
            }
            Tok::Eof => Err(Self::syntax(&t, "unexpected end of query")),
            _ => Err(Self::syntax(
                &t,
                "expected a field, `(`, NOT, ids(...) or last_days(...)",
            )),
        }
    }

    /// Parses `lit ("," lit)* ")"`; the opening paren is already consumed.
    fn parse_list(&mut self) -> Result<Vec<(Token, Literal)>, ParseError> {
        let mut out = Vec::new();
        loop {
            let t = self.next();
            if t.tok == Tok::RParen && out.is_empty() {
                return Err(Self::syntax(&t, "empty list"));
            }
            let lit = Self::literal(&t)?;
            out.push((t, lit));
            let sep = self.next();
            match sep.tok {
                Tok::Comma => continue,
                Tok::RParen => return Ok(out),
                _ => return Err(Self::syntax(&sep, "expected `,` or `)`")),
            }
        }
    }

    fn field(&self, t: &Token) -> Result<Field, ParseError> {
        match &t.tok {
            Tok::Ident(name) => Field::from_name(name)
                .ok_or_else(|| Self::err_at(t, ParseErrorKind::UnknownField(name.clone()))),
            _ => Err(Self::syntax(t, "expected a field name")),
        }
    }

    fn literal(t: &Token) -> Result<Literal, ParseError> {
        match &t.tok {
            Tok::Str(s) => Ok(Literal::Str(s.clone())),
            Tok::Int(i) => Ok(Literal::Int(*i)),
            Tok::Date(d) => Ok(Literal::Date(*d)),
            _ => Err(Self::syntax(
                t,
                "expected a string, integer or date literal",
            )),
        }
    }

    fn typed_literal(
        field: Field,
        op: CmpOp,
        t: &Token,
        lit: Literal,
    ) -> Result<Literal, ParseError> {
        check_comparison(field, op, &lit)
            .map_err(|e| Self::err_at(t, ParseErrorKind::TypeMismatch(e.0)))?;
        Ok(match (field, lit) {
            (Field::Concept, Literal::Str(s)) => Literal::Str(normalize_concept(&s)),
            (_, lit) => lit,
        })
    }
}

/// Parses query text into a type-checked expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let tokens = Lexer::new(text).tokens()?;
    let mut p = Parser { tokens, pos: 0 };
    if p.peek().tok == Tok::Eof {
        return Err(Parser::syntax(p.peek(), "empty query"));
    }
    let e = p.parse_or()?;
    let t = p.next();
    if t.tok != Tok::Eof {
        return Err(Parser::syntax(&t, "unexpected token after expression"));
    }
    Ok(e)
}
