//! Recursive-descent parser.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          right associative
//! atom  := number | ident | ident '(' args ')' | '(' expr ')'
//! ```

use super::{BinOp, Expr, ExprError, Func};

/// Names visible to the parser.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    vars: Vec<String>,
    indices: Vec<String>,
    permissive: bool,
}

impl Scope {
    /// Declared decision variables (in position order) and index variables.
    /// Any other identifier is rejected.
    pub fn new(vars: Vec<String>, indices: Vec<String>) -> Self {
        Scope {
            vars,
            indices,
            permissive: false,
        }
    }

    /// `x<k>` is decision variable k and every other identifier is an index
    /// variable.
    pub fn permissive() -> Self {
        Scope {
            permissive: true,
            ..Scope::default()
        }
    }

    fn resolve(&self, name: &str) -> Option<Expr> {
        if let Some(pos) = self.vars.iter().position(|v| v == name) {
            return Some(Expr::Var(pos));
        }
        if self.indices.iter().any(|v| v == name) {
            return Some(Expr::Index(name.to_string()));
        }
        if name == "pi" {
            return Some(Expr::Const(std::f64::consts::PI));
        }
        if !self.permissive {
            return None;
        }
        if let Some(k) = name
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|k| *k >= 1)
        {
            return Some(Expr::Var(k - 1));
        }
        Some(Expr::Index(name.to_string()))
    }
}

/// Parses with the permissive scope.
pub fn parse(source: &str) -> Result<Expr, ExprError> {
    parse_in(source, &Scope::permissive())
}

pub fn parse_in(source: &str, scope: &Scope) -> Result<Expr, ExprError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope,
    };
    let e = p.expr()?;
    let t = p.peek();
    if t.kind != Tok::End {
        return Err(p.error_at(t, "unexpected trailing input"));
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    kind: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let push = |out: &mut Vec<Token>, kind| {
            out.push(Token {
                kind,
                line: start_line,
                column: start_col,
            })
        };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                line: start_line,
                column: start_col,
                message: format!("malformed number `{text}`"),
            })?;
            col += i - start;
            push(&mut out, Tok::Num(value));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(ExprError::Syntax {
                    line,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        push(&mut out, kind);
        i += 1;
        col += 1;
    }
    out.push(Token {
        kind: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<Token>,
    pos: usize,
    scope: &'s Scope,
}

impl Parser<'_> {
    fn peek(&self) -> Token {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.peek();
        if t.kind != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: Token, message: &str) -> ExprError {
        let what = match &t.kind {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
        };
        ExprError::Syntax {
            line: t.line,
            column: t.column,
            message: format!("{message}, found {what}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek().kind == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek().kind == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let t = self.bump();
        match t.kind {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(ref name) => {
                if self.peek().kind == Tok::LParen {
                    return self.call(name, &t);
                }
                if Func::from_name(name).is_some() {
                    return Err(self.error_at(self.peek(), &format!("expected `(` after `{name}`")));
                }
                self.scope
                    .resolve(name)
                    .ok_or_else(|| ExprError::UnknownIdentifier {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    })
            }
            _ => Err(self.error_at(t, "expected an operand")),
        }
    }

    fn call(&mut self, name: &str, at: &Token) -> Result<Expr, ExprError> {
        let func = Func::from_name(name).ok_or_else(|| ExprError::UnknownIdentifier {
            name: name.to_string(),
            line: at.line,
            column: at.column,
        })?;
        self.bump(); // (
        let mut args = Vec::new();
        if self.peek().kind != Tok::RParen {
            args.push(self.expr()?);
            while self.peek().kind == Tok::Comma {
                self.bump();
                args.push(self.expr()?);
            }
        }
        self.expect_rparen()?;
        if args.len() != 1 {
            return Err(ExprError::Arity {
                name: name.to_string(),
                expected: 1,
                found: args.len(),
                line: at.line,
                column: at.column,
            });
        }
        Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let t = self.bump();
        if t.kind == Tok::RParen {
            Ok(())
        } else {
            Err(self.error_at(t, "expected `)`"))
        }
    }
}
