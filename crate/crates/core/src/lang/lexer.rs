use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Eq,
    Tilde,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Int(i) => i.to_string(),
            Tok::Float(x) => format!("{x:?}"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::LBrace => "{".into(),
            Tok::RBrace => "}".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::LBracket => "[".into(),
            Tok::RBracket => "]".into(),
            Tok::Comma => ",".into(),
            Tok::Semi => ";".into(),
            Tok::Eq => "=".into(),
            Tok::Tilde => "~".into(),
            Tok::Arrow => "<-".into(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
    /// A line break separates this token from the previous one.
    pub newline_before: bool,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, found: &str, message: &str) -> Error {
        Error::Syntax {
            line,
            column,
            found: found.into(),
            message: message.into(),
        }
    }
}

/// Splits model source into tokens, dropping whitespace and comments.
pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    let mut newline = true;
    loop {
        // whitespace and comments
        loop {
            match (cur.peek(), cur.peek2()) {
                (Some('\n'), _) => {
                    newline = true;
                    cur.bump();
                }
                (Some(c), _) if c.is_whitespace() => {
                    cur.bump();
                }
                (Some('/'), Some('/')) => {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let (line, column) = (cur.line, cur.column);
                    cur.bump();
                    cur.bump();
                    let mut closed = false;
                    while let Some(c) = cur.bump() {
                        if c == '\n' {
                            newline = true;
                        }
                        if c == '*' && cur.peek() == Some('/') {
                            cur.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        return Err(cur.error(line, column, "/*", "unterminated comment"));
                    }
                }
                _ => break,
            }
        }
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                line,
                column,
                newline_before: true,
            });
            return Ok(out);
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = cur.pos;
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            Tok::Ident(src[start..cur.pos].into())
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek2(), Some(d) if d.is_ascii_digit()))
        {
            lex_number(&mut cur, line, column)?
        } else if c == '\'' || c == '"' {
            cur.bump();
            let start = cur.pos;
            loop {
                match cur.peek() {
                    Some(q) if q == c => break,
                    Some('\n') | None => {
                        return Err(cur.error(line, column, &src[start - 1..cur.pos], "unterminated string"))
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            let s = src[start..cur.pos].into();
            cur.bump();
            Tok::Str(s)
        } else {
            cur.bump();
            match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '~' => Tok::Tilde,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '<' if cur.peek() == Some('-') => {
                    cur.bump();
                    Tok::Arrow
                }
                other => {
                    let mut buf = [0u8; 4];
                    return Err(cur.error(line, column, other.encode_utf8(&mut buf), "unexpected character"));
                }
            }
        };
        out.push(Token {
            tok,
            line,
            column,
            newline_before: newline,
        });
        newline = false;
    }
}

fn lex_number(cur: &mut Cursor<'_>, line: usize, column: usize) -> Result<Tok> {
    let start = cur.pos;
    let mut is_float = false;
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') {
        is_float = true;
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let after = cur.peek2();
        let signed = matches!(after, Some('+' | '-'));
        let rest = &cur.src[cur.pos + 1 + usize::from(signed)..];
        if rest.starts_with(|c: char| c.is_ascii_digit()) {
            is_float = true;
            cur.bump();
            if signed {
                cur.bump();
            }
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
    let text = &cur.src[start..cur.pos];
    if is_float {
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Tok::Float(x)),
            _ => Err(cur.error(line, column, text, "numeric literal out of range")),
        }
    } else {
        text.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| cur.error(line, column, text, "integer literal out of range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn comments_and_arrows() {
        let toks = kinds("/** doc\n */ x <- 1.5e-3 // tail\n y ~ f()");
        assert_eq!(
            toks,
            [
                Tok::Ident("x".into()),
                Tok::Arrow,
                Tok::Float(1.5e-3),
                Tok::Ident("y".into()),
                Tok::Tilde,
                Tok::Ident("f".into()),
                Tok::LParen,
                Tok::RParen,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn ode_derivative_lexes_as_division() {
        let toks = kinds("dx[n]/dt");
        assert_eq!(toks[4], Tok::Slash);
        assert_eq!(toks[5], Tok::Ident("dt".into()));
    }

    #[test]
    fn newline_flags() {
        let toks = tokenize("a\nb c").unwrap();
        assert!(toks[1].newline_before);
        assert!(!toks[2].newline_before);
    }

    #[test]
    fn errors_carry_position() {
        match tokenize("x\n  @") {
            Err(Error::Syntax { line, column, found, .. }) => {
                assert_eq!((line, column), (2, 3));
                assert_eq!(found, "@");
            }
            other => panic!("{other:?}"),
        }
        assert!(tokenize("/* open").is_err());
        assert!(tokenize("1e999").is_err());
        assert!(tokenize("'abc").is_err());
    }
}
