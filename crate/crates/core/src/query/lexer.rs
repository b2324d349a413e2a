use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    Then,
    And,
    Or,
    Not,
    LParen,
    RParen,
    Comma,
    Equals,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier '{s}'"),
            TokenKind::Number(n) => write!(f, "number {n}"),
            TokenKind::Then => f.write_str("'then'"),
            TokenKind::And => f.write_str("'and'"),
            TokenKind::Or => f.write_str("'or'"),
            TokenKind::Not => f.write_str("'not'"),
            TokenKind::LParen => f.write_str("'('"),
            TokenKind::RParen => f.write_str("')'"),
            TokenKind::Comma => f.write_str("','"),
            TokenKind::Equals => f.write_str("'='"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let single = match c {
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ',' => Some(TokenKind::Comma),
            '=' => Some(TokenKind::Equals),
            _ => None,
        };
        if let Some(kind) = single {
            bump(&mut chars);
            tokens.push(Token { kind, line: tl, column: tc });
        } else if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '#' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                bump(&mut chars);
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while chars
                .peek()
                .is_some_and(|&c| c.is_ascii_alphanumeric() || c == '_')
            {
                word.push(bump(&mut chars));
            }
            let kind = match word.to_ascii_lowercase().as_str() {
                "then" => TokenKind::Then,
                "and" => TokenKind::And,
                "or" => TokenKind::Or,
                "not" => TokenKind::Not,
                _ => TokenKind::Ident(word),
            };
            tokens.push(Token { kind, line: tl, column: tc });
        } else if c.is_ascii_digit() || c == '.' || c == '-' {
            let mut num = String::new();
            if c == '-' {
                num.push(bump(&mut chars));
            }
            let mut prev = '\0';
            while let Some(&d) = chars.peek() {
                let accept = d.is_ascii_digit()
                    || d == '.'
                    || d == 'e'
                    || d == 'E'
                    || ((d == '-' || d == '+') && (prev == 'e' || prev == 'E'));
                if !accept {
                    break;
                }
                prev = bump(&mut chars);
                num.push(prev);
            }
            let value: f64 = num.parse().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("malformed number '{num}'"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                line: tl,
                column: tc,
            });
        } else {
            return Err(Error::Parse {
                line: tl,
                column: tc,
                message: format!("illegal character '{c}'"),
            });
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn ident(s: &str) -> TokenKind {
        TokenKind::Ident(s.into())
    }

    #[test]
    fn negated_atom() {
        assert_eq!(
            kinds("not crossing(X)"),
            vec![TokenKind::Not, ident("crossing"), TokenKind::LParen, ident("X"), TokenKind::RParen]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            kinds("# comment\nnear(A)"),
            vec![ident("near"), TokenKind::LParen, ident("A"), TokenKind::RParen]
        );
    }

    #[test]
    fn split_identifier() {
        assert_eq!(kinds("cross ing("), vec![ident("cross"), ident("ing"), TokenKind::LParen]);
    }

    #[test]
    fn keywords_case_insensitive_and_numbers() {
        assert_eq!(
            kinds("THEN And oR Not x=2.5e1"),
            vec![
                TokenKind::Then,
                TokenKind::And,
                TokenKind::Or,
                TokenKind::Not,
                ident("x"),
                TokenKind::Equals,
                TokenKind::Number(25.0)
            ]
        );
    }

    #[test]
    fn illegal_character_has_location() {
        let err = tokenize("near(A)\n  then $x").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
