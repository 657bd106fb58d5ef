use super::{ParseError, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Tok<'s> {
    Ident(&'s str),
    /// Unsigned magnitude; a leading `-` is a separate token.
    Int(u64, Option<&'s str>),
    Float(f64, Option<&'s str>),
    Fn,
    Extern,
    Let,
    If,
    Else,
    While,
    Return,
    True,
    False,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Arrow,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Eof,
}

impl Tok<'_> {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(..) | Tok::Float(..) => "number".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    pub(crate) fn text(&self) -> &'static str {
        match self {
            Tok::Fn => "fn",
            Tok::Extern => "extern",
            Tok::Let => "let",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::Return => "return",
            Tok::True => "true",
            Tok::False => "false",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Arrow => "->",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Ident(_) => "identifier",
            Tok::Int(..) | Tok::Float(..) => "number",
            Tok::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'s> {
    pub tok: Tok<'s>,
    pub span: SourceSpan,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token<'_>>, ParseError> {
    Lexer { src, bytes: src.as_bytes(), pos: 0, line: 1, line_start: 0 }.run()
}

struct Lexer<'s> {
    src: &'s str,
    bytes: &'s [u8],
    pos: usize,
    line: u32,
    line_start: usize,
}

const SUFFIXES: [&str; 3] = ["i32", "i64", "f64"];

impl<'s> Lexer<'s> {
    fn span_from(&self, start: usize, line: u32, col: u32) -> SourceSpan {
        SourceSpan { start, end: self.pos, line, column: col }
    }

    fn error(&self, start: usize, expected: &[&str], found: String) -> ParseError {
        let col = (start - self.line_start) as u32 + 1;
        ParseError {
            span: SourceSpan { start, end: self.pos.max(start), line: self.line, column: col },
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn peek(&self, ahead: usize) -> u8 {
        self.bytes.get(self.pos + ahead).copied().unwrap_or(0)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek(0) {
                b'\n' => {
                    self.pos += 1;
                    self.line += 1;
                    self.line_start = self.pos;
                }
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'/' if self.peek(1) == b'/' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn run(mut self) -> Result<Vec<Token<'s>>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let start = self.pos;
            let line = self.line;
            let col = (start - self.line_start) as u32 + 1;
            if start == self.bytes.len() {
                out.push(Token { tok: Tok::Eof, span: self.span_from(start, line, col) });
                return Ok(out);
            }
            let c = self.bytes[start];
            let tok = if c.is_ascii_alphabetic() || c == b'_' {
                self.word()
            } else if c.is_ascii_digit() {
                self.number(start)?
            } else {
                self.punct(start)?
            };
            out.push(Token { tok, span: self.span_from(start, line, col) });
        }
    }

    fn word(&mut self) -> Tok<'s> {
        let start = self.pos;
        while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' {
            self.pos += 1;
        }
        match &self.src[start..self.pos] {
            "fn" => Tok::Fn,
            "extern" => Tok::Extern,
            "let" => Tok::Let,
            "if" => Tok::If,
            "else" => Tok::Else,
            "while" => Tok::While,
            "return" => Tok::Return,
            "true" => Tok::True,
            "false" => Tok::False,
            w => Tok::Ident(w),
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok<'s>, ParseError> {
        while self.peek(0).is_ascii_digit() {
            self.pos += 1;
        }
        let mut is_float = false;
        if self.peek(0) == b'.' && self.peek(1).is_ascii_digit() {
            is_float = true;
            self.pos += 1;
            while self.peek(0).is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.peek(0), b'e' | b'E') {
            let sign = matches!(self.peek(1), b'+' | b'-') as usize;
            if self.peek(1 + sign).is_ascii_digit() {
                is_float = true;
                self.pos += 1 + sign;
                while self.peek(0).is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let digits = &self.src[start..self.pos];
        let suffix_start = self.pos;
        while self.peek(0).is_ascii_alphanumeric() || self.peek(0) == b'_' {
            self.pos += 1;
        }
        let suffix = match &self.src[suffix_start..self.pos] {
            "" => None,
            s if SUFFIXES.contains(&s) && !(is_float && s != "f64") => Some(s),
            s => {
                return Err(self.error(suffix_start, &SUFFIXES, format!("suffix `{s}`")));
            }
        };
        if is_float {
            let v: f64 = digits.parse().map_err(|_| self.error(start, &["number"], digits.into()))?;
            Ok(Tok::Float(v, suffix))
        } else {
            let v: u64 = digits.parse().map_err(|_| self.error(start, &["64-bit integer"], digits.into()))?;
            Ok(Tok::Int(v, suffix))
        }
    }

    fn punct(&mut self, start: usize) -> Result<Tok<'s>, ParseError> {
        let two = |a: u8, b: u8| self.peek(0) == a && self.peek(1) == b;
        let (tok, len) = if two(b'-', b'>') {
            (Tok::Arrow, 2)
        } else if two(b'=', b'=') {
            (Tok::EqEq, 2)
        } else if two(b'!', b'=') {
            (Tok::NotEq, 2)
        } else if two(b'<', b'=') {
            (Tok::Le, 2)
        } else if two(b'>', b'=') {
            (Tok::Ge, 2)
        } else if two(b'&', b'&') {
            (Tok::AndAnd, 2)
        } else if two(b'|', b'|') {
            (Tok::OrOr, 2)
        } else {
            let t = match self.peek(0) {
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'{' => Tok::LBrace,
                b'}' => Tok::RBrace,
                b'[' => Tok::LBracket,
                b']' => Tok::RBracket,
                b',' => Tok::Comma,
                b':' => Tok::Colon,
                b';' => Tok::Semi,
                b'=' => Tok::Assign,
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'%' => Tok::Percent,
                b'<' => Tok::Lt,
                b'>' => Tok::Gt,
                _ => {
                    let ch = self.src[start..].chars().next().unwrap();
                    self.pos += ch.len_utf8();
                    return Err(self.error(start, &["token"], format!("character {ch:?}")));
                }
            };
            (t, 1)
        };
        self.pos += len;
        Ok(tok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok<'_>> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_suffixes() {
        assert_eq!(
            toks("1 2i64 3.5 4e2 5f64 1.5e-3f64"),
            vec![
                Tok::Int(1, None),
                Tok::Int(2, Some("i64")),
                Tok::Float(3.5, None),
                Tok::Float(400.0, None),
                Tok::Int(5, Some("f64")),
                Tok::Float(1.5e-3, Some("f64")),
                Tok::Eof
            ]
        );
        assert!(tokenize("1.5i32").is_err());
        assert!(tokenize("7u8").is_err());
    }

    #[test]
    fn spans_track_lines() {
        let t = tokenize("fn\n  x // c\n;").unwrap();
        assert_eq!((t[1].span.line, t[1].span.column, t[1].span.start), (2, 3, 5));
        assert_eq!(t[2].span.line, 3);
    }

    #[test]
    fn operators() {
        assert_eq!(
            toks("-> == != <= >= && || < > = -"),
            vec![
                Tok::Arrow,
                Tok::EqEq,
                Tok::NotEq,
                Tok::Le,
                Tok::Ge,
                Tok::AndAnd,
                Tok::OrOr,
                Tok::Lt,
                Tok::Gt,
                Tok::Assign,
                Tok::Minus,
                Tok::Eof
            ]
        );
    }
}
