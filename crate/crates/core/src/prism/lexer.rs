use std::fmt;

use super::{Pos, PrismError};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Double(String),
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Colon,
    Comma,
    Prime,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    And,
    Or,
    Not,
    Implies,
    Iff,
    Question,
    Arrow,
    DotDot,
    DoubleBar,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "'{s}'"),
            Tok::Int(s) | Tok::Double(s) => return write!(f, "'{s}'"),
            Tok::Str(s) => return write!(f, "\"{s}\""),
            Tok::LBracket => "'['",
            Tok::RBracket => "']'",
            Tok::LParen => "'('",
            Tok::RParen => "')'",
            Tok::LBrace => "'{'",
            Tok::RBrace => "'}'",
            Tok::Semi => "';'",
            Tok::Colon => "':'",
            Tok::Comma => "','",
            Tok::Prime => "'''",
            Tok::Eq => "'='",
            Tok::Neq => "'!='",
            Tok::Lt => "'<'",
            Tok::Le => "'<='",
            Tok::Gt => "'>'",
            Tok::Ge => "'>='",
            Tok::Plus => "'+'",
            Tok::Minus => "'-'",
            Tok::Star => "'*'",
            Tok::Slash => "'/'",
            Tok::And => "'&'",
            Tok::Or => "'|'",
            Tok::Not => "'!'",
            Tok::Implies => "'=>'",
            Tok::Iff => "'<=>'",
            Tok::Question => "'?'",
            Tok::Arrow => "'->'",
            Tok::DotDot => "'..'",
            Tok::DoubleBar => "'||'",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Tokenize PRISM-style text. `//` comments run to the end of the line.
pub fn lex(text: &str) -> Result<Vec<Token>, PrismError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let pos = Pos { line, col };
        let peek = |k: usize| chars.get(i + k).copied();
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && peek(1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_double = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            // `..` is a range, not a decimal point
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1) != Some(&'.') {
                is_double = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let sign = usize::from(matches!(chars.get(i + 1), Some('+') | Some('-')));
                if chars.get(i + 1 + sign).is_some_and(|d| d.is_ascii_digit()) {
                    is_double = true;
                    bump!();
                    if sign == 1 {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Token { tok: if is_double { Tok::Double(s) } else { Tok::Int(s) }, pos });
            continue;
        }
        if c == '"' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                bump!();
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(PrismError::Syntax { pos, msg: "unterminated string".into() });
            }
            let s: String = chars[start..i].iter().collect();
            bump!();
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        let (tok, len) = match (c, peek(1), peek(2)) {
            ('<', Some('='), Some('>')) => (Tok::Iff, 3),
            ('<', Some('='), _) => (Tok::Le, 2),
            ('>', Some('='), _) => (Tok::Ge, 2),
            ('!', Some('='), _) => (Tok::Neq, 2),
            ('=', Some('>'), _) => (Tok::Implies, 2),
            ('-', Some('>'), _) => (Tok::Arrow, 2),
            ('.', Some('.'), _) => (Tok::DotDot, 2),
            ('|', Some('|'), _) => (Tok::DoubleBar, 2),
            ('<', _, _) => (Tok::Lt, 1),
            ('>', _, _) => (Tok::Gt, 1),
            ('!', _, _) => (Tok::Not, 1),
            ('=', _, _) => (Tok::Eq, 1),
            ('-', _, _) => (Tok::Minus, 1),
            ('|', _, _) => (Tok::Or, 1),
            ('&', _, _) => (Tok::And, 1),
            ('+', _, _) => (Tok::Plus, 1),
            ('*', _, _) => (Tok::Star, 1),
            ('/', _, _) => (Tok::Slash, 1),
            ('[', _, _) => (Tok::LBracket, 1),
            (']', _, _) => (Tok::RBracket, 1),
            ('(', _, _) => (Tok::LParen, 1),
            (')', _, _) => (Tok::RParen, 1),
            ('{', _, _) => (Tok::LBrace, 1),
            ('}', _, _) => (Tok::RBrace, 1),
            (';', _, _) => (Tok::Semi, 1),
            (':', _, _) => (Tok::Colon, 1),
            (',', _, _) => (Tok::Comma, 1),
            ('\'', _, _) => (Tok::Prime, 1),
            ('?', _, _) => (Tok::Question, 1),
            _ => return Err(PrismError::Syntax { pos, msg: format!("unexpected character '{c}'") }),
        };
        for _ in 0..len {
            bump!();
        }
        out.push(Token { tok, pos });
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}
