use super::{Pos, SyntaxError};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Dot,
    Arrow,
    LParen,
    RParen,
    Comma,
    Colon,
    Pipe,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Tokenizes `src`, reporting positions relative to `origin` (the position of
/// the first byte of `src` in its enclosing document).
pub fn tokenize(src: &str, origin: Pos) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let mut line = origin.line;
    let mut col = origin.column;

    macro_rules! bump {
        ($c:expr) => {{
            if $c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }};
    }

    while let Some(&(i, c)) = chars.peek() {
        let pos = Pos {
            line,
            column: col,
            offset: origin.offset + i,
        };
        if c.is_whitespace() {
            chars.next();
            bump!(c);
            continue;
        }
        // `--` line comment
        if c == '-' && src[i..].starts_with("--") {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                bump!(c);
            }
            continue;
        }
        let single = |tok| Token { tok, pos };
        match c {
            '.' => {
                chars.next();
                bump!(c);
                out.push(single(Tok::Dot));
            }
            '(' | ')' | ',' | ':' | '|' | '=' => {
                chars.next();
                bump!(c);
                out.push(single(match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '|' => Tok::Pipe,
                    _ => Tok::Eq,
                }));
            }
            '<' | '>' => {
                chars.next();
                bump!(c);
                let tok = match (c, chars.peek().map(|&(_, n)| n)) {
                    ('<', Some('>')) => Some(Tok::Neq),
                    ('<', Some('=')) => Some(Tok::Le),
                    ('>', Some('=')) => Some(Tok::Ge),
                    _ => None,
                };
                match tok {
                    Some(tok) => {
                        chars.next();
                        col += 1;
                        out.push(single(tok));
                    }
                    None => out.push(single(if c == '<' { Tok::Lt } else { Tok::Gt })),
                }
            }
            '-' if src[i..].starts_with("->") => {
                chars.next();
                chars.next();
                col += 2;
                out.push(single(Tok::Arrow));
            }
            '\'' | '"' => {
                chars.next();
                bump!(c);
                let mut text = String::new();
                let mut closed = false;
                while let Some((_, ch)) = chars.next() {
                    bump!(ch);
                    if ch == c {
                        closed = true;
                        break;
                    }
                    if ch == '\\' {
                        if let Some((_, esc)) = chars.next() {
                            bump!(esc);
                            text.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        continue;
                    }
                    text.push(ch);
                }
                if !closed {
                    return Err(SyntaxError::new(pos, "unterminated string literal"));
                }
                out.push(single(Tok::Str(text)));
            }
            c if c.is_ascii_digit() || (c == '-' && next_is_digit(src, i)) => {
                let start = i;
                let mut end = i + c.len_utf8();
                chars.next();
                bump!(c);
                let mut is_float = false;
                while let Some(&(j, d)) = chars.peek() {
                    let frac = d == '.' && !is_float && next_is_digit(src, j);
                    if d.is_ascii_digit() || frac {
                        is_float |= frac;
                        chars.next();
                        bump!(d);
                        end = j + 1;
                    } else {
                        break;
                    }
                }
                let text = &src[start..end];
                let tok = if is_float {
                    Tok::Float(text.parse().map_err(|_| SyntaxError::new(pos, "invalid number"))?)
                } else {
                    Tok::Int(text.parse().map_err(|_| SyntaxError::new(pos, "integer out of range"))?)
                };
                out.push(single(tok));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                let mut end = i;
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        chars.next();
                        bump!(d);
                        end = j + d.len_utf8();
                    } else {
                        break;
                    }
                }
                out.push(single(Tok::Ident(src[start..end].to_string())));
            }
            other => return Err(SyntaxError::new(pos, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

fn next_is_digit(src: &str, i: usize) -> bool {
    src[i + 1..].chars().next().is_some_and(|c| c.is_ascii_digit())
}
