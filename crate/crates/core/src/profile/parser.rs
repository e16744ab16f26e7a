//! Recursive-descent parser for the profile grammar.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-" factor | base ("^" exponent)?
//! base   := number | "t" | func "(" expr ")" | "(" expr ")"
//! exponent := "-"? number | "(" "-"? number ")"
//! func   := exp | log | sqrt | sin | cos | tanh | atan
//! ```
//!
//! Whitespace is insignificant. Numbers are decimal literals with an optional
//! exponent part.

use super::expr::{BinaryOp, Node, ProfileExpr, UnaryOp};
use super::ProfileError;

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

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> ProfileError {
    ProfileError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ProfileError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((start, Tok::Plus)),
            b'-' => out.push((start, Tok::Minus)),
            b'*' => out.push((start, Tok::Star)),
            b'/' => out.push((start, Tok::Slash)),
            b'^' => out.push((start, Tok::Caret)),
            b'(' => out.push((start, Tok::LParen)),
            b')' => out.push((start, Tok::RParen)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(start, format!("number `{text}` is not finite")));
                }
                out.push((start, Tok::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        }
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let tok = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, want: Tok) -> Result<(), ProfileError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!(
                    "expected {}, found {}",
                    want.describe(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn expr(&mut self) -> Result<Node, ProfileError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ProfileError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Node, ProfileError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Node::unary(UnaryOp::Neg, self.factor()?));
        }
        let base = self.base()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.exponent()?;
            return Ok(Node::pow(base, exponent));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<f64, ProfileError> {
        let at = self.offset();
        let parenthesised = *self.peek() == Tok::LParen;
        if parenthesised {
            self.bump();
        }
        let sign = if *self.peek() == Tok::Minus {
            self.bump();
            -1.0
        } else {
            1.0
        };
        let value = match self.peek() {
            Tok::Num(v) => *v,
            Tok::End => {
                return Err(syntax(
                    self.offset(),
                    "expected exponent, found end of input",
                ))
            }
            _ => return Err(ProfileError::NonConstantExponent { offset: at }),
        };
        self.bump();
        if parenthesised {
            if *self.peek() != Tok::RParen {
                return Err(ProfileError::NonConstantExponent { offset: at });
            }
            self.bump();
        }
        Ok(sign * value)
    }

    fn base(&mut self) -> Result<Node, ProfileError> {
        let (at, tok) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) if name == "t" => Ok(Node::Var),
            Tok::Ident(name) => {
                let Some(op) = UnaryOp::from_name(&name) else {
                    return Err(ProfileError::UnknownIdentifier { name, offset: at });
                };
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Node::unary(op, arg))
            }
            other => Err(syntax(
                at,
                format!("expected operand, found {}", other.describe()),
            )),
        }
    }
}

/// Parses profile source into an expression tree.
pub fn parse_profile(src: &str) -> Result<ProfileExpr, ProfileError> {
    if src.trim().is_empty() {
        return Err(syntax(0, "empty profile"));
    }
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(
            p.offset(),
            format!("unexpected {} after expression", p.peek().describe()),
        ));
    }
    Ok(ProfileExpr::new(root))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_profile() {
        assert_eq!(parse_profile("t").unwrap().root(), &Node::Var);
    }

    #[test]
    fn cone_profile_tree() {
        let e = parse_profile("0.5*t + 0.5*tanh(t)").unwrap();
        let want = Node::binary(
            BinaryOp::Add,
            Node::binary(BinaryOp::Mul, Node::Const(0.5), Node::Var),
            Node::binary(
                BinaryOp::Mul,
                Node::Const(0.5),
                Node::unary(UnaryOp::Tanh, Node::Var),
            ),
        );
        assert_eq!(e.root(), &want);
    }

    #[test]
    fn dangling_operator_reports_end_offset() {
        match parse_profile("t +") {
            Err(ProfileError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier() {
        match parse_profile("2*x") {
            Err(ProfileError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "x");
                assert_eq!(offset, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_profile("cosh(t)"),
            Err(ProfileError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn exponent_must_be_literal() {
        assert!(matches!(
            parse_profile("t^t"),
            Err(ProfileError::NonConstantExponent { offset: 2 })
        ));
        assert!(matches!(
            parse_profile("t^(1+t)"),
            Err(ProfileError::NonConstantExponent { .. })
        ));
        let e = parse_profile("t^(-1.5)").unwrap();
        assert_eq!(e.root(), &Node::pow(Node::Var, -1.5));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_profile("-t^2").unwrap();
        assert_eq!(
            e.root(),
            &Node::unary(UnaryOp::Neg, Node::pow(Node::Var, 2.0))
        );
    }

    #[test]
    fn whitespace_and_scientific_literals() {
        let e = parse_profile("  1.5e-3 *\tt ").unwrap();
        assert_eq!(
            e.root(),
            &Node::binary(BinaryOp::Mul, Node::Const(1.5e-3), Node::Var)
        );
    }

    #[test]
    fn empty_and_garbage_inputs() {
        assert!(matches!(
            parse_profile(""),
            Err(ProfileError::Syntax { .. })
        ));
        assert!(matches!(
            parse_profile("t $ 1"),
            Err(ProfileError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_profile("(t"),
            Err(ProfileError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(
            parse_profile("t t"),
            Err(ProfileError::Syntax { offset: 2, .. })
        ));
    }
}
