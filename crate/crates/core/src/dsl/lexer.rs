use super::error::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Unsigned magnitude; sign handling happens in the parser.
    Int(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Assign,
    Lt,
    Le,
    Plus,
    PlusPlus,
    PlusAssign,
    Minus,
    MinusMinus,
    Star,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Assign => "=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Plus => "+",
            Tok::PlusPlus => "++",
            Tok::PlusAssign => "+=",
            Tok::Minus => "-",
            Tok::MinusMinus => "--",
            Tok::Star => "*",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

/// Splits source text into tokens. `//` starts a comment running to end of line.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let ch = chars.next();
            if ch == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            ch
        };

        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '/' {
            bump(&mut chars);
            if chars.peek() == Some(&'/') {
                while let Some(&ch) = chars.peek() {
                    if ch == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
                continue;
            }
            return Err(ParseError::new(tl, tc, ParseErrorKind::UnexpectedChar('/')));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_ascii_alphanumeric() || ch == '_' {
                    ident.push(ch);
                    bump(&mut chars);
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Ident(ident),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut value: u64 = 0;
            while let Some(&ch) = chars.peek() {
                let Some(d) = ch.to_digit(10) else { break };
                value = value
                    .checked_mul(10)
                    .and_then(|v| v.checked_add(u64::from(d)))
                    .ok_or_else(|| ParseError::new(tl, tc, ParseErrorKind::IntegerOverflow))?;
                bump(&mut chars);
            }
            out.push(Token {
                tok: Tok::Int(value),
                line: tl,
                column: tc,
            });
            continue;
        }

        bump(&mut chars);
        let next = chars.peek().copied();
        let tok = match (c, next) {
            ('+', Some('+')) => {
                bump(&mut chars);
                Tok::PlusPlus
            }
            ('+', Some('=')) => {
                bump(&mut chars);
                Tok::PlusAssign
            }
            ('-', Some('-')) => {
                bump(&mut chars);
                Tok::MinusMinus
            }
            ('<', Some('=')) => {
                bump(&mut chars);
                Tok::Le
            }
            ('+', _) => Tok::Plus,
            ('-', _) => Tok::Minus,
            ('*', _) => Tok::Star,
            ('<', _) => Tok::Lt,
            ('=', _) => Tok::Assign,
            ('(', _) => Tok::LParen,
            (')', _) => Tok::RParen,
            ('{', _) => Tok::LBrace,
            ('}', _) => Tok::RBrace,
            ('[', _) => Tok::LBracket,
            (']', _) => Tok::RBracket,
            (';', _) => Tok::Semi,
            (':', _) => Tok::Colon,
            (',', _) => Tok::Comma,
            (other, _) => {
                return Err(ParseError::new(
                    tl,
                    tc,
                    ParseErrorKind::UnexpectedChar(other),
                ))
            }
        };
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }

    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}
