use crate::expr::{parse_expr, tokenize, Dialect, Parser, Pos, SyntaxError, Tok};

use super::{Node, Template, TemplateError};

const BLOCK_WORDS: &[&str] = &["template", "for", "if", "else", "file", "comment"];

#[derive(Debug)]
enum Piece {
    Text(String, Pos),
    Open { word: String, body: String, body_pos: Pos, pos: Pos },
    Close { word: String, pos: Pos },
    Interp { src: String, src_pos: Pos, pos: Pos },
    Comment(String),
}

impl Piece {
    fn is_block_tag(&self) -> bool {
        matches!(self, Piece::Open { .. } | Piece::Close { .. } | Piece::Comment(..))
    }
}

/// Finds the end of a tag body starting at `from`: the index of the closing
/// `]` (or of `/]` when `self_closing`) at paren depth 0 outside quotes.
fn scan_tag(src: &str, from: usize, single_line: bool) -> Option<(usize, bool)> {
    let bytes = src.as_bytes();
    let mut depth = 0i32;
    let mut quote: Option<u8> = None;
    let mut i = from;
    while i < bytes.len() {
        let b = bytes[i];
        if let Some(q) = quote {
            if b == b'\\' {
                i += 2;
                continue;
            }
            if b == q {
                quote = None;
            }
        } else {
            match b {
                b'\n' if single_line => return None,
                b'\'' | b'"' => quote = Some(b),
                b'(' => depth += 1,
                b')' => depth -= 1,
                b'/' if depth <= 0 && bytes.get(i + 1) == Some(&b']') => return Some((i, true)),
                b']' if depth <= 0 => return Some((i, false)),
                _ => {}
            }
        }
        i += 1;
    }
    None
}

fn keyword_at(src: &str, at: usize) -> Option<&'static str> {
    BLOCK_WORDS.iter().copied().find(|w| {
        src[at..].starts_with(w)
            && !src[at + w.len()..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric() || c == '_')
    })
}

fn lex(src: &str) -> Result<Vec<Piece>, TemplateError> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut text_pos = Pos::start();
    let mut pos = Pos::start();
    let mut i = 0;

    let flush = |text: &mut String, text_pos: Pos, pieces: &mut Vec<Piece>| {
        if !text.is_empty() {
            pieces.push(Piece::Text(std::mem::take(text), text_pos));
        }
    };

    while i < src.len() {
        let rest = &src[i..];
        if !rest.starts_with('[') {
            let next = rest.find('[').unwrap_or(rest.len());
            if text.is_empty() {
                text_pos = pos;
            }
            text.push_str(&rest[..next]);
            pos = pos.advance(&rest[..next]);
            i += next;
            continue;
        }

        // End tag: [/word]
        if let Some(word) = rest.strip_prefix("[/").and_then(|r| keyword_at(r, 0).map(|w| (w, r))) {
            let (word, r) = word;
            if r[word.len()..].starts_with(']') {
                flush(&mut text, text_pos, &mut pieces);
                let len = 2 + word.len() + 1;
                pieces.push(Piece::Close { word: word.into(), pos });
                pos = pos.advance(&src[i..i + len]);
                i += len;
                continue;
            }
        }

        if let Some(word) = keyword_at(src, i + 1) {
            let body_start = i + 1 + word.len();
            if word == "comment" {
                let Some((end, self_closing)) = scan_tag(src, body_start, false) else {
                    return Err(TemplateError::syntax(pos, "unterminated `[comment` tag"));
                };
                let (content, consumed) = if self_closing {
                    (src[body_start..end].to_string(), end + 2 - i)
                } else {
                    let close = src[end..]
                        .find("[/comment]")
                        .ok_or_else(|| TemplateError::syntax(pos, "`[comment]` without `[/comment]`"))?;
                    (src[end + 1..end + close].to_string(), end + close + "[/comment]".len() - i)
                };
                flush(&mut text, text_pos, &mut pieces);
                pieces.push(Piece::Comment(content.trim().to_string()));
                pos = pos.advance(&src[i..i + consumed]);
                i += consumed;
                continue;
            }
            let Some((end, _)) = scan_tag(src, body_start, false) else {
                return Err(TemplateError::syntax(pos, format!("unterminated `[{word}` tag")));
            };
            // `/]` is not a valid terminator for block tags; scan_tag stops on
            // it only when the body itself is malformed.
            if src[end..].starts_with("/]") {
                return Err(TemplateError::syntax(pos, format!("`[{word}` must be closed with `]`")));
            }
            flush(&mut text, text_pos, &mut pieces);
            let body = src[body_start..end].to_string();
            pieces.push(Piece::Open {
                word: word.into(),
                body_pos: pos.advance(&src[i..body_start]),
                body,
                pos,
            });
            pos = pos.advance(&src[i..end + 1]);
            i = end + 1;
            continue;
        }

        // Interpolation: `[expr/]` on one line. Anything else is literal `[`.
        if let Some((end, true)) = scan_tag(src, i + 1, true) {
            flush(&mut text, text_pos, &mut pieces);
            pieces.push(Piece::Interp {
                src: src[i + 1..end].to_string(),
                src_pos: pos.advance("["),
                pos,
            });
            pos = pos.advance(&src[i..end + 2]);
            i = end + 2;
            continue;
        }

        if text.is_empty() {
            text_pos = pos;
        }
        text.push('[');
        pos = pos.advance("[");
        i += 1;
    }
    flush(&mut text, text_pos, &mut pieces);
    Ok(pieces)
}

/// A block tag alone on its line owns that line's indentation and newline.
fn absorb_standalone_lines(pieces: &mut [Piece]) {
    let standalone: Vec<bool> = (0..pieces.len())
        .map(|i| {
            if !pieces[i].is_block_tag() {
                return false;
            }
            let before_ok = match i.checked_sub(1).map(|j| &pieces[j]) {
                None => true,
                Some(Piece::Text(t, _)) => match t.rfind('\n') {
                    Some(nl) => t[nl + 1..].chars().all(|c| c == ' ' || c == '\t'),
                    None => i == 1 && t.chars().all(|c| c == ' ' || c == '\t'),
                },
                Some(_) => false,
            };
            let after_ok = match pieces.get(i + 1) {
                None => true,
                Some(Piece::Text(t, _)) => {
                    let line = t.split('\n').next().unwrap_or("");
                    line.trim_end_matches('\r').chars().all(|c| c == ' ' || c == '\t')
                        && (t.contains('\n') || i + 2 == pieces.len())
                }
                Some(_) => false,
            };
            before_ok && after_ok
        })
        .collect();

    for (i, &is_standalone) in standalone.iter().enumerate() {
        if !is_standalone {
            continue;
        }
        if let Some(Piece::Text(t, _)) = i.checked_sub(1).map(|j| &mut pieces[j]) {
            let keep = t.rfind('\n').map_or(0, |nl| nl + 1);
            t.truncate(keep);
        }
        if let Some(Piece::Text(t, p)) = pieces.get_mut(i + 1) {
            let cut = t.find('\n').map_or(t.len(), |nl| nl + 1);
            *p = p.advance(&t[..cut]);
            t.drain(..cut);
        }
    }
}

fn header_parser(body: &str, body_pos: Pos) -> Result<Vec<crate::expr::Token>, TemplateError> {
    Ok(tokenize(body, body_pos)?)
}

fn parse_for(body: &str, body_pos: Pos) -> Result<(String, Option<String>, crate::expr::Expr), TemplateError> {
    let tokens = header_parser(body, body_pos)?;
    let mut p = Parser::new(&tokens, body_pos.advance(body), Dialect::Query);
    p.expect(Tok::LParen, "`(`")?;
    let (var, _) = p.expect_name("a loop variable")?;
    let class = if p.eat(&Tok::Colon) {
        Some(p.expect_name("a type name")?.0)
    } else {
        None
    };
    p.expect(Tok::Pipe, "`|`")?;
    let iter = p.expr()?;
    p.expect(Tok::RParen, "`)`")?;
    if !p.is_done() {
        return Err(p.unexpected("`]`").into());
    }
    Ok((var, class, iter))
}

fn parse_file(body: &str, body_pos: Pos) -> Result<(crate::expr::Expr, bool, String), TemplateError> {
    let tokens = header_parser(body, body_pos)?;
    let mut p = Parser::new(&tokens, body_pos.advance(body), Dialect::Query);
    p.expect(Tok::LParen, "`(`")?;
    let name = p.expr()?;
    p.expect(Tok::Comma, "`,`")?;
    let append = if p.eat_ident("true") {
        true
    } else if p.eat_ident("false") {
        false
    } else {
        return Err(p.unexpected("`true` or `false` for the append flag").into());
    };
    let mut encoding = "UTF-8".to_string();
    if p.eat(&Tok::Comma) {
        match p.next() {
            Some(crate::expr::Token { tok: Tok::Str(s), .. }) => encoding = s.clone(),
            _ => return Err(SyntaxError::new(p.pos(), "expected an encoding string").into()),
        }
    }
    p.expect(Tok::RParen, "`)`")?;
    if !p.is_done() {
        return Err(p.unexpected("`]`").into());
    }
    Ok((name, append, encoding))
}

fn parse_header(body: &str, body_pos: Pos) -> Result<(String, String, String), TemplateError> {
    let tokens = header_parser(body, body_pos)?;
    let mut p = Parser::new(&tokens, body_pos.advance(body), Dialect::Query);
    for visibility in ["public", "protected", "private"] {
        if p.eat_ident(visibility) {
            break;
        }
    }
    let (name, _) = p.expect_name("a template name")?;
    p.expect(Tok::LParen, "`(`")?;
    let (param, _) = p.expect_name("a parameter name")?;
    p.expect(Tok::Colon, "`:`")?;
    let (class, _) = p.expect_name("a parameter type")?;
    p.expect(Tok::RParen, "`)`")?;
    if !p.is_done() {
        return Err(p.unexpected("`]`").into());
    }
    Ok((name, param, class))
}

struct Frame {
    word: String,
    pos: Pos,
    node: Option<Node>,
    nodes: Vec<Node>,
    else_nodes: Option<Vec<Node>>,
}

impl Frame {
    fn sink(&mut self) -> &mut Vec<Node> {
        self.else_nodes.as_mut().unwrap_or(&mut self.nodes)
    }
}

/// Parses template text into a [`Template`].
pub fn parse_template(text: &str) -> Result<Template, TemplateError> {
    let mut pieces = lex(text)?;
    absorb_standalone_lines(&mut pieces);

    let mut header: Option<(String, String, String)> = None;
    let mut stack: Vec<Frame> = vec![Frame {
        word: String::new(),
        pos: Pos::start(),
        node: None,
        nodes: Vec::new(),
        else_nodes: None,
    }];

    for piece in pieces {
        match piece {
            Piece::Text(t, _) if t.is_empty() => {}
            Piece::Text(t, _) => stack.last_mut().expect("root frame").sink().push(Node::Text(t)),
            Piece::Comment(c) => stack.last_mut().expect("root frame").sink().push(Node::Comment(c)),
            Piece::Interp { src, src_pos, pos } => {
                let expr = parse_expr(&src, src_pos, Dialect::Query)?;
                stack.last_mut().expect("root frame").sink().push(Node::Interp { expr, pos });
            }
            Piece::Open { word, body, body_pos, pos } => {
                let node = match word.as_str() {
                    "template" => {
                        if header.is_some() || stack.len() > 1 {
                            return Err(TemplateError::syntax(pos, "only one top-level `[template]` is supported"));
                        }
                        header = Some(parse_header(&body, body_pos)?);
                        None
                    }
                    "for" => {
                        let (var, class, iter) = parse_for(&body, body_pos)?;
                        Some(Node::For {
                            var,
                            class,
                            iter,
                            body: Vec::new(),
                            pos,
                        })
                    }
                    "if" => Some(Node::If {
                        cond: parse_expr(&body, body_pos, Dialect::Query)?,
                        then: Vec::new(),
                        otherwise: Vec::new(),
                        pos,
                    }),
                    "file" => {
                        let (name, append, encoding) = parse_file(&body, body_pos)?;
                        Some(Node::File {
                            name,
                            append,
                            encoding,
                            body: Vec::new(),
                            pos,
                        })
                    }
                    "else" => {
                        let top = stack.last_mut().expect("root frame");
                        if top.word != "if" || top.else_nodes.is_some() || !body.trim().is_empty() {
                            return Err(TemplateError::Unbalanced {
                                pos,
                                message: "`[else]` outside of an `[if]` block".into(),
                            });
                        }
                        top.else_nodes = Some(Vec::new());
                        continue;
                    }
                    _ => unreachable!("comment handled by the lexer"),
                };
                stack.push(Frame {
                    word,
                    pos,
                    node,
                    nodes: Vec::new(),
                    else_nodes: None,
                });
            }
            Piece::Close { word, pos } => {
                if stack.len() == 1 || stack.last().is_some_and(|f| f.word != word) {
                    let message = match stack.last() {
                        Some(f) if stack.len() > 1 => {
                            format!("`[/{word}]` closes `[{}]` opened at {}", f.word, f.pos)
                        }
                        _ => format!("stray `[/{word}]`"),
                    };
                    return Err(TemplateError::Unbalanced { pos, message });
                }
                let frame = stack.pop().expect("checked above");
                let parent = stack.last_mut().expect("root frame").sink();
                match frame.node {
                    None => parent.extend(frame.nodes),
                    Some(Node::For { var, class, iter, pos, .. }) => parent.push(Node::For {
                        var,
                        class,
                        iter,
                        body: frame.nodes,
                        pos,
                    }),
                    Some(Node::If { cond, pos, .. }) => parent.push(Node::If {
                        cond,
                        then: frame.nodes,
                        otherwise: frame.else_nodes.unwrap_or_default(),
                        pos,
                    }),
                    Some(Node::File {
                        name,
                        append,
                        encoding,
                        pos,
                        ..
                    }) => parent.push(Node::File {
                        name,
                        append,
                        encoding,
                        body: frame.nodes,
                        pos,
                    }),
                    Some(_) => unreachable!(),
                }
            }
        }
    }

    if stack.len() > 1 {
        let open = stack.last().expect("non-empty");
        return Err(TemplateError::Unbalanced {
            pos: open.pos,
            message: format!("`[{}]` is never closed", open.word),
        });
    }
    let body = stack.pop().expect("root frame").nodes;
    let (name, param, param_class) = match header {
        Some((n, p, c)) => (n, Some(p), Some(c)),
        None => ("main".to_string(), None, None),
    };
    Ok(Template {
        name,
        param,
        param_class,
        body,
    })
}
