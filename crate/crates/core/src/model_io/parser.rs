//! Recursive descent parser for interaction expressions.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?
//! exponent:= ['-'] INT | '(' ['-'] INT ')'
//! primary := NUMBER | IDENT | '(' expr ')'
//! ```
//!
//! A minus sign directly in front of a numeric literal that is not raised to a
//! power is folded into a negative constant.

use thiserror::Error;

use super::expr::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: unexpected {found}, expected {expected}")]
    Syntax {
        position: usize,
        found: String,
        expected: &'static str,
    },
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("exponent at byte {position} must be an integer literal, found `{found}`")]
    NonIntegerExponent { position: usize, found: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
    text: String,
}

fn describe(t: &Token) -> String {
    match t.tok {
        Tok::End => "end of input".to_string(),
        _ => format!("`{}`", t.text),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token {
                tok,
                pos: start,
                text: c.to_string(),
            });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                position: start,
                found: format!("`{text}`"),
                expected: "a number",
            })?;
            out.push(Token {
                tok: Tok::Num(value),
                pos: start,
                text: text.to_string(),
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            out.push(Token {
                tok: Tok::Ident(text.to_string()),
                pos: start,
                text: text.to_string(),
            });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or(c);
        return Err(ParseError::Syntax {
            position: start,
            found: format!("`{ch}`"),
            expected: "an operator, number, identifier or parenthesis",
        });
    }
    out.push(Token {
        tok: Tok::End,
        pos: src.len(),
        text: String::new(),
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    at: usize,
    vars: &'a [String],
    params: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.at + offset).min(self.toks.len() - 1);
        &self.toks[i]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &'static str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            position: t.pos,
            found: describe(t),
            expected,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok != Tok::Minus {
            return self.power();
        }
        self.bump();
        if let Tok::Num(v) = self.peek().tok {
            if self.peek_at(1).tok != Tok::Caret {
                self.bump();
                return Ok(Expr::Const(-v));
            }
        }
        Ok(Expr::Neg(Box::new(self.unary()?)))
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let k = self.exponent()?;
        Ok(Expr::Pow(Box::new(base), k))
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let parenthesized = self.peek().tok == Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let negative = self.peek().tok == Tok::Minus;
        if negative {
            self.bump();
        }
        let t = self.bump();
        let k = match t.tok {
            Tok::Num(v) => {
                let is_int_literal = t.text.bytes().all(|b| b.is_ascii_digit());
                if !is_int_literal || v > f64::from(i32::MAX) {
                    return Err(ParseError::NonIntegerExponent {
                        position: t.pos,
                        found: t.text,
                    });
                }
                v as i32
            }
            Tok::Ident(_) | Tok::LParen => {
                return Err(ParseError::NonIntegerExponent {
                    position: t.pos,
                    found: t.text,
                })
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: t.pos,
                    found: describe(&t),
                    expected: "an integer exponent",
                })
            }
        };
        if parenthesized {
            if self.peek().tok != Tok::RParen {
                return Err(self.error("`)`"));
            }
            self.bump();
        }
        Ok(if negative { -k } else { k })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Ident(name) => {
                if let Some(i) = self.vars.iter().position(|n| *n == name) {
                    Ok(Expr::Var(i))
                } else if let Some(i) = self.params.iter().position(|n| *n == name) {
                    Ok(Expr::Param(i))
                } else {
                    Err(ParseError::UnknownIdentifier {
                        name,
                        position: t.pos,
                    })
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.error("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(ParseError::Syntax {
                position: t.pos,
                found: describe(&t),
                expected: "a number, identifier or `(`",
            }),
        }
    }
}

/// Parses a single arithmetic expression, resolving identifiers against the
/// declared variable names first and parameter names second.
pub fn parse_expression(
    text: &str,
    var_names: &[String],
    param_names: &[String],
) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        vars: var_names,
        params: param_names,
    };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.error("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn z3() -> Vec<String> {
        names(&["z1", "z2", "z3"])
    }

    #[test]
    fn single_identifier() {
        assert_eq!(parse_expression("z1", &z3(), &[]).unwrap(), Expr::Var(0));
    }

    #[test]
    fn rational_interaction_term() {
        let params = names(&["m", "uA", "uO", "uC"]);
        let e = parse_expression(
            "(0.2*z1^2 + 0.5 + uA) / (10*m + 0.1*z1^2 + 0.5*z2^2 + 0.5*z3^2)",
            &z3(),
            &params,
        )
        .unwrap();
        let Expr::Div(num, den) = &e else {
            panic!("expected quotient, got {e:?}")
        };
        assert!(num.depends_on(super::super::expr::Wrt::Param(1)));
        assert!(den.depends_on(super::super::expr::Wrt::Param(0)));
        let v: f64 = e.eval(&[12.0, 0.14, 0.14], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - 29.3 / (10.0 + 14.4 + 0.0098 + 0.0098)).abs() < 1e-12);
    }

    #[test]
    fn doubled_operator_is_syntax_error_at_second_plus() {
        let err = parse_expression("z1 + + z2", &z3(), &[]).unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax {
                position: 5,
                found: "`+`".into(),
                expected: "a number, identifier or `(`"
            }
        );
    }

    #[test]
    fn unknown_identifier() {
        let err = parse_expression("z1 * k", &z3(), &[]).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { ref name, position: 5 } if name == "k"));
    }

    #[test]
    fn non_integer_exponent_rejected() {
        for src in ["z1^2.5", "z1^m", "z1^(z2)"] {
            let err = parse_expression(src, &z3(), &names(&["m"])).unwrap_err();
            assert!(
                matches!(err, ParseError::NonIntegerExponent { .. }),
                "{src}: {err:?}"
            );
        }
    }

    #[test]
    fn unary_minus_and_powers() {
        assert_eq!(
            parse_expression("-z1^2", &z3(), &[]).unwrap(),
            Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Var(0)), 2)))
        );
        assert_eq!(
            parse_expression("-2^2", &z3(), &[]).unwrap(),
            Expr::Neg(Box::new(Expr::Pow(Box::new(Expr::Const(2.0)), 2)))
        );
        assert_eq!(
            parse_expression("z1^-2", &z3(), &[]).unwrap(),
            Expr::Pow(Box::new(Expr::Var(0)), -2)
        );
        assert_eq!(
            parse_expression("3 * -2", &z3(), &[]).unwrap(),
            Expr::Mul(Box::new(Expr::Const(3.0)), Box::new(Expr::Const(-2.0)))
        );
    }

    #[test]
    fn unbalanced_parenthesis() {
        assert!(matches!(
            parse_expression("(z1 + z2", &z3(), &[]),
            Err(ParseError::Syntax { position: 8, .. })
        ));
        assert!(parse_expression("z1)", &z3(), &[]).is_err());
        assert!(parse_expression("", &z3(), &[]).is_err());
    }

    #[test]
    fn scientific_literals() {
        let e = parse_expression("1.5e-3 * z1 + 2E2", &z3(), &[]).unwrap();
        let v: f64 = e.eval(&[2.0, 0.0, 0.0], &[]).unwrap();
        assert!((v - 200.003).abs() < 1e-12);
    }
}
