use crate::ast::SourceSpan;
use crate::parser::SyntaxError;
use crate::symbol::Sym;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `name:`, one keyword part.
    Keyword(String),
    Binary(String),
    Int(i64),
    Str(String),
    /// `#foo`, `#foo:bar:`, `#+`
    Symbol(String),
    /// `#(`
    ArrayStart,
    Assign,
    Caret,
    Dot,
    Colon,
    Pipe,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

const BINARY_CHARS: &str = "+-*/\\<>=~,@%&?!";

pub fn tokenize(source: &str, offset: usize, file: Sym) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<(usize, char)> = source.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let pos = |i: usize| chars.get(i).map(|&(p, _)| p).unwrap_or(source.len()) + offset;
    let err = |start: usize, end: usize, message: &str| SyntaxError {
        span: SourceSpan::new(start, end, file),
        message: message.to_string(),
    };

    while i < chars.len() {
        let c = chars[i].1;
        let start = pos(i);
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '"' {
            i += 1;
            while at(i).is_some_and(|c| c != '"') {
                i += 1;
            }
            if at(i).is_none() {
                return Err(err(start, pos(i), "unterminated comment"));
            }
            i += 1;
            continue;
        }
        let tok = if c.is_alphabetic() || c == '_' {
            let s = i;
            while at(i).is_some_and(|c| c.is_alphanumeric() || c == '_') {
                i += 1;
            }
            let word: String = chars[s..i].iter().map(|&(_, c)| c).collect();
            // `name:` is a keyword unless it is the start of `name :=`.
            if at(i) == Some(':') && at(i + 1) != Some('=') {
                i += 1;
                Tok::Keyword(format!("{word}:"))
            } else {
                Tok::Ident(word)
            }
        } else if c.is_ascii_digit() {
            let s = i;
            while at(i).is_some_and(|c| c.is_ascii_digit()) {
                i += 1;
            }
            let text: String = chars[s..i].iter().map(|&(_, c)| c).collect();
            let value = text
                .parse::<i64>()
                .map_err(|_| err(start, pos(i), "integer literal out of range"))?;
            Tok::Int(value)
        } else if c == '\'' {
            i += 1;
            let mut text = String::new();
            loop {
                match at(i) {
                    None => return Err(err(start, pos(i), "unterminated string")),
                    Some('\'') if at(i + 1) == Some('\'') => {
                        text.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(text)
        } else if c == '#' {
            i += 1;
            match at(i) {
                Some('(') => {
                    i += 1;
                    Tok::ArrayStart
                }
                Some(ch) if ch.is_alphabetic() || ch == '_' => {
                    let s = i;
                    while at(i).is_some_and(|c| c.is_alphanumeric() || c == '_' || c == ':') {
                        i += 1;
                    }
                    Tok::Symbol(chars[s..i].iter().map(|&(_, c)| c).collect())
                }
                Some(ch) if BINARY_CHARS.contains(ch) || ch == '|' => {
                    let s = i;
                    while at(i).is_some_and(|c| BINARY_CHARS.contains(c) || c == '|') {
                        i += 1;
                    }
                    Tok::Symbol(chars[s..i].iter().map(|&(_, c)| c).collect())
                }
                _ => return Err(err(start, pos(i), "malformed symbol literal")),
            }
        } else if c == ':' && at(i + 1) == Some('=') {
            i += 2;
            Tok::Assign
        } else if BINARY_CHARS.contains(c) {
            let s = i;
            while at(i).is_some_and(|c| BINARY_CHARS.contains(c)) {
                i += 1;
            }
            Tok::Binary(chars[s..i].iter().map(|&(_, c)| c).collect())
        } else {
            i += 1;
            match c {
                '^' => Tok::Caret,
                '.' => Tok::Dot,
                ':' => Tok::Colon,
                '|' => Tok::Pipe,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                other => return Err(err(start, pos(i), &format!("unexpected character {other:?}"))),
            }
        };
        tokens.push(Token { tok, start, end: pos(i) });
    }
    let end = source.len() + offset;
    tokens.push(Token { tok: Tok::Eof, start: end, end });
    Ok(tokens)
}
