//! Recursive-descent parser for the modelling language.
//!
//! Statements inside blocks are separated by a line break or `;`. Expression
//! precedence is the usual one: unary minus binds tighter than `*` and `/`,
//! which bind tighter than `+` and `-`; all binary operators associate left.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};

const MAX_DEPTH: usize = 200;

const RESERVED: &[&str] = &[
    "model", "dim", "const", "param", "input", "noise", "state", "obs", "sub", "ode",
];

/// Parses a complete model file.
pub fn parse_model(source: &str) -> Result<ModelAst> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let model = p.model()?;
    p.expect(&Tok::Eof, "expected end of input after model")?;
    Ok(model)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn token(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = self.token();
        Error::Syntax {
            line: t.line,
            column: t.column,
            found: t.tok.describe(),
            message: message.into(),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, message: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(message))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        Ok(())
    }

    fn model(&mut self) -> Result<ModelAst> {
        if !self.is_keyword("model") {
            return Err(self.error("expected `model`"));
        }
        self.advance();
        let name = self.ident("model name")?;
        self.expect(&Tok::LBrace, "expected `{` after model name")?;
        let mut model = ModelAst {
            name,
            dims: Vec::new(),
            consts: Vec::new(),
            vars: Vec::new(),
            blocks: Vec::new(),
        };
        let mut names: Vec<String> = Vec::new();
        let mut declare = |name: &str, kind: &'static str| -> Result<()> {
            if names.iter().any(|n| n == name) {
                return Err(Error::Duplicate {
                    kind,
                    name: name.into(),
                });
            }
            names.push(name.into());
            Ok(())
        };
        loop {
            while self.eat(&Tok::Semi) {}
            match self.peek().clone() {
                Tok::RBrace => {
                    self.advance();
                    break;
                }
                Tok::Ident(kw) => match kw.as_str() {
                    "dim" => {
                        let d = self.dim()?;
                        declare(&d.name, "dim")?;
                        model.dims.push(d);
                    }
                    "const" => {
                        let c = self.constant()?;
                        declare(&c.name, "const")?;
                        model.consts.push(c);
                    }
                    "sub" => {
                        let b = self.block()?;
                        if model.blocks.iter().any(|x| x.name == b.name) {
                            return Err(Error::Duplicate {
                                kind: "block",
                                name: b.name.as_str().into(),
                            });
                        }
                        model.blocks.push(b);
                    }
                    other => {
                        if let Some(role) = Role::from_keyword(other) {
                            self.advance();
                            let v = self.var_decl(role)?;
                            declare(&v.name, "variable")?;
                            model.vars.push(v);
                        } else if matches!(other, "inline" | "function" | "include" | "model") {
                            return Err(Error::Unsupported(format!("`{other}` declarations")));
                        } else {
                            return Err(self.error("expected a declaration or `sub` block"));
                        }
                    }
                },
                _ => return Err(self.error("expected a declaration or `}`")),
            }
        }
        Ok(model)
    }

    fn dim(&mut self) -> Result<DimDecl> {
        self.advance();
        let name = self.ident("dimension name")?;
        self.expect(&Tok::LParen, "expected `(` after dimension name")?;
        let args = self.named_args()?;
        let mut size = None;
        let mut boundary = Boundary::None;
        for a in args {
            match (a.name.as_str(), a.value) {
                ("size", ArgValue::Expr(Expr::Number(x))) if x >= 1.0 && x == libm::floor(x) && x < 1e9 => {
                    size = Some(x as usize)
                }
                ("size", _) => return Err(self.error("dimension size must be a positive integer")),
                ("boundary", ArgValue::Str(s)) if s == "cyclic" => boundary = Boundary::Cyclic,
                ("boundary", ArgValue::Str(s)) if s == "none" => boundary = Boundary::None,
                ("boundary", _) => return Err(self.error("boundary must be 'cyclic' or 'none'")),
                (other, _) => return Err(Error::Unsupported(format!("dimension argument `{other}`"))),
            }
        }
        let size = size.ok_or_else(|| self.error("dimension requires `size`"))?;
        Ok(DimDecl { name, size, boundary })
    }

    fn constant(&mut self) -> Result<ConstDecl> {
        self.advance();
        let name = self.ident("constant name")?;
        self.expect(&Tok::Eq, "expected `=` in constant declaration")?;
        let negative = self.eat(&Tok::Minus);
        let value = match self.advance() {
            Tok::Int(i) => i as f64,
            Tok::Float(x) => x,
            _ => {
                self.pos -= 1;
                return Err(Error::Unsupported(
                    "constant values must be numeric literals".into(),
                ));
            }
        };
        Ok(ConstDecl {
            name,
            value: if negative { -value } else { value },
        })
    }

    fn var_decl(&mut self, role: Role) -> Result<VarDecl> {
        let name = self.ident("variable name")?;
        let mut dims = Vec::new();
        if self.eat(&Tok::LBracket) {
            loop {
                dims.push(self.ident("dimension name")?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RBracket, "expected `]`")?;
        }
        Ok(VarDecl { name, role, dims })
    }

    fn block(&mut self) -> Result<Block> {
        self.advance();
        let raw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error("expected block name")),
        };
        let name = BlockName::from_name(&raw).ok_or(Error::UnknownBlock(raw))?;
        self.advance();
        let args = if self.eat(&Tok::LParen) {
            self.named_args()?
        } else {
            Vec::new()
        };
        self.expect(&Tok::LBrace, "expected `{` to open block")?;
        let statements = self.statements()?;
        Ok(Block {
            name,
            args,
            statements,
        })
    }

    /// Parses `name = value, ...)` up to and including the closing paren.
    fn named_args(&mut self) -> Result<Vec<NamedArg>> {
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            let name = self.ident("argument name")?;
            self.expect(&Tok::Eq, "expected `=` in named argument")?;
            let value = if let Tok::Str(s) = self.peek() {
                let s = s.clone();
                self.advance();
                ArgValue::Str(s)
            } else {
                ArgValue::Expr(self.expr()?)
            };
            out.push(NamedArg { name, value });
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "expected `,` or `)`")?;
        }
    }

    /// Statements up to and including the closing brace.
    fn statements(&mut self) -> Result<Vec<Statement>> {
        let mut out = Vec::new();
        let mut separated = true;
        loop {
            while self.eat(&Tok::Semi) {
                separated = true;
            }
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            if !separated && !self.token().newline_before {
                return Err(self.error("expected a line break or `;` between statements"));
            }
            out.push(self.statement()?);
            separated = false;
        }
    }

    fn statement(&mut self) -> Result<Statement> {
        if self.is_keyword("ode") {
            self.advance();
            let args = if self.eat(&Tok::LParen) {
                self.named_args()?
            } else {
                Vec::new()
            };
            self.expect(&Tok::LBrace, "expected `{` to open ode block")?;
            let equations = self.ode_equations()?;
            return Ok(Statement::Ode { args, equations });
        }
        let lhs = self.var_ref()?;
        match self.peek() {
            Tok::Tilde => {
                self.advance();
                let dist = self.dist_call()?;
                Ok(Statement::Sample { lhs, dist })
            }
            Tok::Arrow => {
                self.advance();
                let rhs = self.expr()?;
                Ok(Statement::Assign { lhs, rhs })
            }
            Tok::Eq => Err(Error::Unsupported(
                "`=` assignment outside an ode block (use `<-`)".into(),
            )),
            _ => Err(self.error("expected `~` or `<-`")),
        }
    }

    fn ode_equations(&mut self) -> Result<Vec<OdeEquation>> {
        let mut out = Vec::new();
        let mut separated = true;
        loop {
            while self.eat(&Tok::Semi) {
                separated = true;
            }
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            if !separated && !self.token().newline_before {
                return Err(self.error("expected a line break or `;` between equations"));
            }
            let raw = match self.peek() {
                Tok::Ident(s) if s.len() > 1 && s.starts_with('d') => s.clone(),
                _ => return Err(self.error("expected `d<var>/dt = ...`")),
            };
            self.advance();
            let indices = self.indices()?;
            self.expect(&Tok::Slash, "expected `/dt`")?;
            if !self.is_keyword("dt") {
                return Err(self.error("expected `dt`"));
            }
            self.advance();
            self.expect(&Tok::Eq, "expected `=`")?;
            let rhs = self.expr()?;
            out.push(OdeEquation {
                lhs: VarRef {
                    name: raw[1..].to_string(),
                    indices,
                },
                rhs,
            });
            separated = false;
        }
    }

    fn var_ref(&mut self) -> Result<VarRef> {
        let name = self.ident("variable name")?;
        let indices = self.indices()?;
        Ok(VarRef { name, indices })
    }

    fn indices(&mut self) -> Result<Vec<IndexExpr>> {
        let mut out = Vec::new();
        if !self.eat(&Tok::LBracket) {
            return Ok(out);
        }
        loop {
            out.push(self.index()?);
            if self.eat(&Tok::RBracket) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "expected `,` or `]`")?;
        }
    }

    fn index(&mut self) -> Result<IndexExpr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(IndexExpr::Literal(i))
            }
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                self.advance();
                let mut offset: i64 = 0;
                loop {
                    let sign = match self.peek() {
                        Tok::Plus => 1,
                        Tok::Minus => -1,
                        _ => break,
                    };
                    self.advance();
                    match self.advance() {
                        Tok::Int(k) => {
                            offset = offset
                                .checked_add(sign * k)
                                .ok_or_else(|| self.error("index offset out of range"))?;
                        }
                        _ => {
                            self.pos -= 1;
                            return Err(Error::Unsupported(
                                "index expressions must be a dimension plus an integer offset".into(),
                            ));
                        }
                    }
                }
                if !matches!(self.peek(), Tok::Comma | Tok::RBracket) {
                    return Err(Error::Unsupported(
                        "index expressions must be a dimension plus an integer offset".into(),
                    ));
                }
                Ok(IndexExpr::Dim { name, offset })
            }
            _ => Err(self.error("expected an index")),
        }
    }

    fn dist_call(&mut self) -> Result<DistCall> {
        let name = self.ident("distribution name")?;
        self.expect(&Tok::LParen, "expected `(` after distribution name")?;
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let named = matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Eq;
                if named {
                    let n = self.ident("argument name")?;
                    self.advance();
                    args.push(Arg::Named(n, self.expr()?));
                } else {
                    args.push(Arg::Positional(self.expr()?));
                }
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma, "expected `,` or `)`")?;
            }
        }
        Ok(DistCall { name, args })
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&Tok::Minus) {
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Number(i as f64))
            }
            Tok::Float(x) => {
                self.advance();
                Ok(Expr::Number(x))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "expected `)`")?;
                Ok(e)
            }
            Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => {
                if *self.peek_at(1) == Tok::LParen {
                    self.advance();
                    self.advance();
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Eq {
                                return Err(Error::Unsupported(format!(
                                    "named arguments in call to `{name}`"
                                )));
                            }
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(&Tok::Comma, "expected `,` or `)`")?;
                        }
                    }
                    Ok(Expr::Call { func: name, args })
                } else {
                    Ok(Expr::Var(self.var_ref()?))
                }
            }
            _ => Err(self.error("expected an expression")),
        }
    }
}
