//! Recursive-descent parser.
//!
//! ```text
//! program  := loop*
//! loop     := 'for' '(' ['parallel'] IDX '=' INT ';' IDX '<' (INT|IDENT) ';' IDX '++' ')'
//!             '{' item* '}'
//! item     := LABEL ':' IDENT '[' index ']' '=' expr ';'
//!           | 'send' '(' INT ',' IDX ',' IDENT ')' ';'
//!           | 'wait' '(' INT ',' IDX ['-' INT] ',' IDENT ')' ';'
//! index    := IDX | IDX '+' INT | IDX '-' INT
//! expr     := term (('+'|'-') term)*
//! term     := factor ('*' factor)*
//! factor   := INT | '-' INT | IDENT '[' index ']' | '(' expr ')'
//! ```
//!
//! A `send` attaches after the statement preceding it, a `wait` before the
//! statement following it.

use std::collections::HashSet;

use super::ast::*;
use super::error::{ParseError, ParseErrorKind};
use super::lexer::{tokenize, Tok, Token};

pub fn parse(src: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut loops = Vec::new();
    while !p.at(&Tok::Eof) {
        loops.push(p.parse_loop()?);
    }
    Ok(Program { loops })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let t = self.peek();
        ParseError::new(t.line, t.column, kind)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error_here(ParseErrorKind::Unexpected {
            expected: expected.to_string(),
            found: self.peek().tok.describe(),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, ParseError> {
        if self.at(&tok) {
            Ok(self.next())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(Token, String), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((self.next(), s))
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    fn index_var(&mut self, index: &str) -> Result<(), ParseError> {
        let (tok, name) = self.ident("loop index")?;
        if name != index {
            return Err(ParseError::new(
                tok.line,
                tok.column,
                ParseErrorKind::IndexMismatch {
                    expected: index.to_string(),
                    found: name,
                },
            ));
        }
        Ok(())
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        let negative = if self.at(&Tok::Minus) {
            self.next();
            true
        } else {
            false
        };
        let t = self.peek().clone();
        let Tok::Int(mag) = t.tok else {
            return Err(self.unexpected("integer"));
        };
        self.next();
        signed(mag, negative)
            .ok_or_else(|| ParseError::new(t.line, t.column, ParseErrorKind::IntegerOverflow))
    }

    fn parse_loop(&mut self) -> Result<LoopNest, ParseError> {
        self.expect_keyword("for")?;
        self.expect(Tok::LParen, "`(`")?;
        let parallel = matches!(&self.peek().tok, Tok::Ident(s) if s == "parallel")
            && matches!(self.peek_at(1), Tok::Ident(_));
        if parallel {
            self.next();
        }
        let (_, index) = self.ident("loop index")?;
        self.expect(Tok::Assign, "`=`")?;
        let lower = self.signed_int()?;
        self.expect(Tok::Semi, "`;`")?;

        self.index_var(&index)?;
        self.expect(Tok::Lt, "`<`")?;
        let bound_tok = self.peek().clone();
        let upper = match &bound_tok.tok {
            Tok::Ident(s) if *s != index => {
                let s = s.clone();
                self.next();
                Bound::Symbol(s)
            }
            Tok::Int(_) | Tok::Minus => Bound::Const(self.signed_int()?),
            _ => return Err(self.unexpected("upper bound")),
        };
        if let Bound::Const(u) = upper {
            if lower >= u {
                return Err(ParseError::new(
                    bound_tok.line,
                    bound_tok.column,
                    ParseErrorKind::EmptyRange { lower, upper: u },
                ));
            }
        }
        self.expect(Tok::Semi, "`;`")?;
        self.parse_step(&index)?;
        self.expect(Tok::RParen, "`)`")?;

        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut statements: Vec<Statement> = Vec::new();
        let mut syncs = Vec::new();
        let mut pending_waits: Vec<SyncInstr> = Vec::new();
        let mut pending_wait_pos: Option<(usize, usize)> = None;
        let mut labels = HashSet::new();

        while !self.at(&Tok::RBrace) {
            let start = self.peek().clone();
            let is_sync = matches!(&start.tok, Tok::Ident(s) if s == "send" || s == "wait")
                && matches!(self.peek_at(1), Tok::LParen);
            if is_sync {
                let instr = self.parse_sync(&index)?;
                match instr.op {
                    SyncOp::Send => {
                        let Some(prev) = statements.last() else {
                            return Err(ParseError::new(
                                start.line,
                                start.column,
                                ParseErrorKind::DanglingSend,
                            ));
                        };
                        syncs.push(SyncInstr {
                            anchor: Anchor {
                                label: prev.label.clone(),
                                position: AnchorPos::After,
                            },
                            ..instr
                        });
                    }
                    SyncOp::Wait => {
                        pending_wait_pos.get_or_insert((start.line, start.column));
                        pending_waits.push(instr);
                    }
                }
                continue;
            }

            let stmt = self.parse_statement(&index)?;
            if !labels.insert(stmt.label.clone()) {
                return Err(ParseError::new(
                    start.line,
                    start.column,
                    ParseErrorKind::DuplicateLabel(stmt.label),
                ));
            }
            for mut w in pending_waits.drain(..) {
                w.anchor.label = stmt.label.clone();
                syncs.push(w);
            }
            pending_wait_pos = None;
            statements.push(stmt);
        }
        if let Some((line, column)) = pending_wait_pos {
            return Err(ParseError::new(line, column, ParseErrorKind::DanglingWait));
        }
        if statements.is_empty() {
            return Err(ParseError::new(
                open.line,
                open.column,
                ParseErrorKind::EmptyBody,
            ));
        }
        self.expect(Tok::RBrace, "`}`")?;

        Ok(LoopNest {
            index,
            lower,
            upper,
            parallel,
            statements,
            syncs,
        })
    }

    /// Accepts `i++`, `++i`, `i += 1` and `i = i + 1`.
    fn parse_step(&mut self, index: &str) -> Result<(), ParseError> {
        let start = self.peek().clone();
        let stride_err =
            || ParseError::new(start.line, start.column, ParseErrorKind::NonUnitStride);
        match start.tok {
            Tok::PlusPlus => {
                self.next();
                self.index_var(index)
            }
            Tok::MinusMinus => Err(stride_err()),
            _ => {
                self.index_var(index)?;
                match self.next().tok {
                    Tok::PlusPlus => Ok(()),
                    Tok::MinusMinus => Err(stride_err()),
                    Tok::PlusAssign => match self.signed_int()? {
                        1 => Ok(()),
                        _ => Err(stride_err()),
                    },
                    Tok::Assign => {
                        self.index_var(index)?;
                        let sign = match self.next().tok {
                            Tok::Plus => 1,
                            Tok::Minus => -1,
                            _ => return Err(stride_err()),
                        };
                        match sign * self.signed_int()? {
                            1 => Ok(()),
                            _ => Err(stride_err()),
                        }
                    }
                    _ => Err(stride_err()),
                }
            }
        }
    }

    fn parse_sync(&mut self, index: &str) -> Result<SyncInstr, ParseError> {
        let (_, name) = self.ident("`send` or `wait`")?;
        self.expect(Tok::LParen, "`(`")?;
        let reg_tok = self.peek().clone();
        let Tok::Int(reg) = reg_tok.tok else {
            return Err(self.unexpected("register number"));
        };
        let reg = u32::try_from(reg).map_err(|_| {
            ParseError::new(
                reg_tok.line,
                reg_tok.column,
                ParseErrorKind::IntegerOverflow,
            )
        })?;
        self.next();
        self.expect(Tok::Comma, "`,`")?;
        self.index_var(index)?;
        let mut offset = 0;
        if name == "wait" && self.at(&Tok::Minus) {
            self.next();
            let t = self.peek().clone();
            let Tok::Int(mag) = t.tok else {
                return Err(self.unexpected("integer"));
            };
            self.next();
            offset = i64::try_from(mag)
                .ok()
                .filter(|v| *v <= MAX_OFFSET)
                .ok_or_else(|| {
                    ParseError::new(
                        t.line,
                        t.column,
                        ParseErrorKind::OffsetOutOfRange(mag.min(i64::MAX as u64) as i64),
                    )
                })?;
        }
        self.expect(Tok::Comma, "`,`")?;
        let (_, var) = self.ident("variable name")?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Semi, "`;`")?;

        let anchor = Anchor {
            label: String::new(),
            position: if name == "send" {
                AnchorPos::After
            } else {
                AnchorPos::Before
            },
        };
        Ok(SyncInstr {
            op: if name == "send" {
                SyncOp::Send
            } else {
                SyncOp::Wait
            },
            reg,
            offset,
            var,
            anchor,
        })
    }

    fn parse_statement(&mut self, index: &str) -> Result<Statement, ParseError> {
        let (_, label) = self.ident("statement label")?;
        self.expect(Tok::Colon, "`:`")?;
        let lhs = self.parse_array_ref(index)?;
        self.expect(Tok::Assign, "`=`")?;
        let rhs = self.parse_expr(index)?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Statement { label, lhs, rhs })
    }

    fn parse_array_ref(&mut self, index: &str) -> Result<ArrayRef, ParseError> {
        let (tok, array) = self.ident("array name")?;
        if !array.starts_with(|c: char| c.is_ascii_lowercase()) {
            return Err(ParseError::new(
                tok.line,
                tok.column,
                ParseErrorKind::BadArrayName(array),
            ));
        }
        if !self.at(&Tok::LBracket) {
            return Err(ParseError::new(
                tok.line,
                tok.column,
                ParseErrorKind::Scalar(array),
            ));
        }
        self.next();
        let offset = self.parse_index(index)?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(ArrayRef { array, offset })
    }

    fn parse_index(&mut self, index: &str) -> Result<i64, ParseError> {
        let start = self.peek().clone();
        let bad = || {
            ParseError::new(
                start.line,
                start.column,
                ParseErrorKind::BadIndex {
                    index: index.to_string(),
                },
            )
        };
        match &start.tok {
            Tok::Ident(s) if s == index => {
                self.next();
            }
            _ => return Err(bad()),
        }
        let sign = match self.peek().tok {
            Tok::Plus => 1,
            Tok::Minus => -1,
            Tok::RBracket => return Ok(0),
            _ => return Err(bad()),
        };
        self.next();
        let t = self.peek().clone();
        let Tok::Int(mag) = t.tok else {
            return Err(bad());
        };
        self.next();
        if !matches!(self.peek().tok, Tok::RBracket) {
            return Err(bad());
        }
        match i64::try_from(mag) {
            Ok(v) if v <= MAX_OFFSET => Ok(sign * v),
            _ => Err(ParseError::new(
                t.line,
                t.column,
                ParseErrorKind::OffsetOutOfRange(sign * (mag.min(i64::MAX as u64) as i64)),
            )),
        }
    }

    fn parse_expr(&mut self, index: &str) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term(index)?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.parse_term(index)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn parse_term(&mut self, index: &str) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_factor(index)?;
        while self.at(&Tok::Star) {
            self.next();
            let rhs = self.parse_factor(index)?;
            lhs = Expr::bin(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self, index: &str) -> Result<Expr, ParseError> {
        match &self.peek().tok {
            Tok::Int(_) | Tok::Minus => Ok(Expr::lit(self.signed_int()?)),
            Tok::LParen => {
                self.next();
                let e = self.parse_expr(index)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(_) => Ok(Expr::Ref {
                target: self.parse_array_ref(index)?,
            }),
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn signed(mag: u64, negative: bool) -> Option<i64> {
    if negative {
        0i64.checked_sub_unsigned(mag)
    } else {
        i64::try_from(mag).ok()
    }
}
