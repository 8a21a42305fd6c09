use thiserror::Error;

use super::{BinOp, Expression, Function, Variable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} must be a non-negative integer literal")]
    NonIntegerExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonIntegerExponent { offset } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Number(&'a str),
    Ident(&'a str),
    Op(u8),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_whitespace(&mut self) {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its starting offset.
    fn next(&mut self) -> Result<(Token<'a>, usize), ParseError> {
        self.skip_whitespace();
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let Some(&b) = bytes.get(start) else {
            return Ok((Token::End, start));
        };
        let token = match b {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Token::Op(b)
            }
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut k = end + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        end = k;
                    }
                }
                self.pos = end;
                Token::Number(&self.src[start..end])
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let mut end = start;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                self.pos = end;
                Token::Ident(&self.src[start..end])
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok((token, start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token<'a>,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (current, offset) = lexer.next()?;
        Ok(Self {
            lexer,
            current,
            offset,
        })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (token, offset) = self.lexer.next()?;
        self.current = token;
        self.offset = offset;
        Ok(())
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset,
            message: message.into(),
        })
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.current {
                Token::Op(b'+') => BinOp::Add,
                Token::Op(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.current {
                Token::Op(b'*') => BinOp::Mul,
                Token::Op(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.current == Token::Op(b'-') {
            self.advance()?;
            return Ok(Expression::neg(self.unary()?));
        }
        self.power()
    }

    // power := primary ('^' INTEGER)*
    fn power(&mut self) -> Result<Expression, ParseError> {
        let mut base = self.primary()?;
        while self.current == Token::Op(b'^') {
            self.advance()?;
            let exponent = match self.current {
                Token::Number(text) if text.bytes().all(|b| b.is_ascii_digit()) => text
                    .parse::<u32>()
                    .map_err(|_| ParseError::NonIntegerExponent {
                        offset: self.offset,
                    })?,
                Token::End => return self.syntax("expected exponent"),
                _ => {
                    return Err(ParseError::NonIntegerExponent {
                        offset: self.offset,
                    })
                }
            };
            self.advance()?;
            base = Expression::pow(base, exponent);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        match self.current.clone() {
            Token::Number(text) => {
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: self.offset,
                    message: format!("malformed number `{text}`"),
                })?;
                if !value.is_finite() {
                    return self.syntax(format!("number `{text}` is out of range"));
                }
                self.advance()?;
                Ok(Expression::lit(value))
            }
            Token::Ident(name) => {
                let offset = self.offset;
                if let Some(var) = Variable::from_name(name) {
                    self.advance()?;
                    return Ok(Expression::var(var));
                }
                if let Some(func) = Function::from_name(name) {
                    self.advance()?;
                    if self.current != Token::LParen {
                        return self.syntax(format!("expected `(` after `{name}`"));
                    }
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expression::call(func, arg));
                }
                Err(ParseError::UnknownIdentifier {
                    name: name.to_string(),
                    offset,
                })
            }
            Token::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::End => self.syntax("unexpected end of input"),
            Token::RParen => self.syntax("unexpected `)`"),
            Token::Op(op) => self.syntax(format!("unexpected operator `{}`", op as char)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.current != Token::RParen {
            return self.syntax("expected `)`");
        }
        self.advance()
    }
}

/// Parses the concrete expression syntax.
///
/// Precedence from tightest to loosest: `^`, unary minus, `* /`, `+ -`.
/// Binary operators associate to the left.
pub fn parse_expression(source: &str) -> Result<Expression, ParseError> {
    let mut parser = Parser::new(source)?;
    let expr = parser.expr()?;
    if parser.current != Token::End {
        return parser.syntax("unexpected trailing input");
    }
    Ok(expr)
}
