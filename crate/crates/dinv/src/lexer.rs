//! Tokenizer for the mini-C input language.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const DUMMY: Span = Span { line: 0, col: 0 };
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int,
    Assume,
    While,
    If,
    Else,
    Break,
    Assert,
    True,
    False,
    Ite,
    Ident(String),
    Number(i64),
    Star,
    Plus,
    Minus,
    PlusPlus,
    MinusMinus,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Not,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Int => "int",
            Tok::Assume => "assume",
            Tok::While => "while",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::Break => "break",
            Tok::Assert => "assert",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Ite => "ite",
            Tok::Ident(s) => return write!(f, "{s}"),
            Tok::Number(n) => return write!(f, "{n}"),
            Tok::Star => "*",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::PlusPlus => "++",
            Tok::MinusMinus => "--",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Not => "!",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Eof => "end of input",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("lex error at {span}: {message}")]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let span = Span { line, col };
        let Some(&c) = chars.peek() else {
            out.push(Token { tok: Tok::Eof, span });
            return Ok(out);
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '/' => {
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&c2) = chars.peek() {
                        if c2 == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(LexError { message: "unexpected '/'".into(), span });
                }
            }
            '0'..='9' => {
                let mut n: i64 = 0;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        n = n
                            .checked_mul(10)
                            .and_then(|n| n.checked_add(v as i64))
                            .ok_or_else(|| LexError {
                                message: "integer literal too large".into(),
                                span,
                            })?;
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Number(n), span });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                let tok = match s.as_str() {
                    "int" => Tok::Int,
                    "assume" => Tok::Assume,
                    "while" => Tok::While,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    "break" => Tok::Break,
                    "assert" => Tok::Assert,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "ite" => Tok::Ite,
                    _ => Tok::Ident(s),
                };
                out.push(Token { tok, span });
            }
            _ => {
                bump!();
                let two = |chars: &mut std::iter::Peekable<std::str::Chars>, want: char| {
                    chars.peek() == Some(&want)
                };
                let tok = match c {
                    '*' => Tok::Star,
                    '+' => {
                        if two(&mut chars, '+') {
                            bump!();
                            Tok::PlusPlus
                        } else {
                            Tok::Plus
                        }
                    }
                    '-' => {
                        if two(&mut chars, '-') {
                            bump!();
                            Tok::MinusMinus
                        } else {
                            Tok::Minus
                        }
                    }
                    '=' => {
                        if two(&mut chars, '=') {
                            bump!();
                            Tok::EqEq
                        } else {
                            Tok::Assign
                        }
                    }
                    '!' => {
                        if two(&mut chars, '=') {
                            bump!();
                            Tok::NotEq
                        } else {
                            Tok::Not
                        }
                    }
                    '<' => {
                        if two(&mut chars, '=') {
                            bump!();
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    '>' => {
                        if two(&mut chars, '=') {
                            bump!();
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    '&' => {
                        if two(&mut chars, '&') {
                            bump!();
                            Tok::AndAnd
                        } else {
                            return Err(LexError { message: "expected '&&'".into(), span });
                        }
                    }
                    '|' => {
                        if two(&mut chars, '|') {
                            bump!();
                            Tok::OrOr
                        } else {
                            return Err(LexError { message: "expected '||'".into(), span });
                        }
                    }
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    other => {
                        return Err(LexError {
                            message: format!("unexpected character '{other}'"),
                            span,
                        })
                    }
                };
                out.push(Token { tok, span });
            }
        }
    }
}
