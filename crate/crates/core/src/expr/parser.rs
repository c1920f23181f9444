use super::lexer::{tokenize, Tok, Token};
use super::{BinOp, Dialect, Expr, Literal, Pos, SyntaxError};

/// Words that end an expression in the constraint language.
const RESERVED: &[&str] = &["context", "inv", "and", "or", "not", "implies", "true", "false"];

/// Recursive-descent parser over a token stream.
///
/// Precedence, loosest first: `implies`, `or`, `and`, `not`, comparison,
/// postfix navigation/calls.
pub struct Parser<'t> {
    tokens: &'t [Token],
    at: usize,
    end: Pos,
    dialect: Dialect,
}

impl<'t> Parser<'t> {
    pub fn new(tokens: &'t [Token], end: Pos, dialect: Dialect) -> Self {
        Parser {
            tokens,
            at: 0,
            end,
            dialect,
        }
    }

    pub fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.at)
    }

    pub fn is_done(&self) -> bool {
        self.at >= self.tokens.len()
    }

    pub fn pos(&self) -> Pos {
        self.peek().map_or(self.end, |t| t.pos)
    }

    pub fn next(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.at);
        self.at += 1;
        t
    }

    pub fn peek_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(w), .. }) if w == word)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_ident(&mut self, word: &str) -> bool {
        if self.peek_ident(word) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: Tok, what: &str) -> Result<Pos, SyntaxError> {
        let pos = self.pos();
        if self.eat(&tok) {
            Ok(pos)
        } else {
            Err(self.unexpected(what))
        }
    }

    pub fn expect_name(&mut self, what: &str) -> Result<(String, Pos), SyntaxError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(name), pos }) if !RESERVED.contains(&name.as_str()) => {
                self.at += 1;
                Ok((name.clone(), *pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    pub fn unexpected(&self, what: &str) -> SyntaxError {
        let found = match self.peek() {
            Some(t) => describe(&t.tok),
            None => "end of input".into(),
        };
        SyntaxError::new(self.pos(), format!("expected {what}, found {found}"))
    }

    pub fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.or_expr()?;
        while self.dialect == Dialect::Constraint && self.peek_ident("implies") {
            let pos = self.pos();
            self.at += 1;
            let rhs = self.or_expr()?;
            lhs = binary(BinOp::Implies, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and_expr()?;
        while self.peek_ident("or") {
            let pos = self.pos();
            self.at += 1;
            let rhs = self.and_expr()?;
            lhs = binary(BinOp::Or, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.not_expr()?;
        while self.peek_ident("and") {
            let pos = self.pos();
            self.at += 1;
            let rhs = self.not_expr()?;
            lhs = binary(BinOp::And, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, SyntaxError> {
        if self.peek_ident("not") {
            let pos = self.pos();
            self.at += 1;
            return Ok(Expr::Not(Box::new(self.not_expr()?), pos));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.postfix()?;
        let op = match self.peek().map(|t| &t.tok) {
            Some(Tok::Eq) => BinOp::Eq,
            Some(Tok::Neq) => BinOp::Neq,
            Some(Tok::Lt) => BinOp::Lt,
            Some(Tok::Le) => BinOp::Le,
            Some(Tok::Gt) => BinOp::Gt,
            Some(Tok::Ge) => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = self.pos();
        self.at += 1;
        let rhs = self.postfix()?;
        Ok(binary(op, lhs, rhs, pos))
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut target = self.atom()?;
        loop {
            if self.eat(&Tok::Dot) {
                let (name, pos) = self.expect_name("a feature or operation name after `.`")?;
                if self.peek().map(|t| &t.tok) == Some(&Tok::LParen) {
                    if !self.dialect.allows_method(&name) {
                        return Err(SyntaxError::new(pos, format!("unknown operation `.{name}()`")));
                    }
                    let args = self.args()?;
                    target = Expr::Call {
                        target: Box::new(target),
                        op: name,
                        args,
                        arrow: false,
                        pos,
                    };
                } else {
                    target = Expr::Nav {
                        target: Box::new(target),
                        feature: name,
                        pos,
                    };
                }
            } else if self.eat(&Tok::Arrow) {
                let (name, pos) = self.expect_name("a collection operation after `->`")?;
                if !self.dialect.allows_arrow(&name) {
                    return Err(SyntaxError::new(pos, format!("unknown collection operation `->{name}()`")));
                }
                if matches!(name.as_str(), "forAll" | "exists") {
                    self.expect(Tok::LParen, "`(`")?;
                    let (var, _) = self.expect_name("an iterator variable")?;
                    self.expect(Tok::Pipe, "`|`")?;
                    let body = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    target = Expr::Iterate {
                        target: Box::new(target),
                        op: name,
                        var,
                        body: Box::new(body),
                        pos,
                    };
                } else {
                    let args = self.args()?;
                    target = Expr::Call {
                        target: Box::new(target),
                        op: name,
                        args,
                        arrow: true,
                        pos,
                    };
                }
            } else {
                return Ok(target);
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(Tok::Comma, "`,` or `)`")?;
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let Some(token) = self.peek() else {
            return Err(self.unexpected("an expression"));
        };
        let pos = token.pos;
        let expr = match &token.tok {
            Tok::Int(v) => Expr::Lit(Literal::Int(*v)),
            Tok::Float(v) => Expr::Lit(Literal::Float(*v)),
            Tok::Str(s) => Expr::Lit(Literal::Str(s.clone())),
            Tok::LParen => {
                self.at += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            Tok::Ident(w) if w == "true" || w == "false" => Expr::Lit(Literal::Bool(w == "true")),
            Tok::Ident(w) if w == "self" && self.dialect == Dialect::Constraint => Expr::SelfRef(pos),
            Tok::Ident(w) if !RESERVED.contains(&w.as_str()) => Expr::Var(w.clone(), pos),
            _ => return Err(self.unexpected("an expression")),
        };
        self.at += 1;
        Ok(expr)
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr, pos: Pos) -> Expr {
    Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
        pos,
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Float(v) => format!("`{v}`"),
        Tok::Str(s) => format!("'{s}'"),
        Tok::Dot => "`.`".into(),
        Tok::Arrow => "`->`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Neq => "`<>`".into(),
        Tok::Lt => "`<`".into(),
        Tok::Le => "`<=`".into(),
        Tok::Gt => "`>`".into(),
        Tok::Ge => "`>=`".into(),
    }
}

/// Parses a complete expression from `src`; trailing tokens are an error.
pub fn parse_expr(src: &str, origin: Pos, dialect: Dialect) -> Result<Expr, SyntaxError> {
    let tokens = tokenize(src, origin)?;
    let mut p = Parser::new(&tokens, origin.advance(src), dialect);
    let e = p.expr()?;
    if !p.is_done() {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}
