//! ECMAScript tokenizer.
//!
//! Produces a flat token stream. Template literals are lexed eagerly: the
//! substitutions inside `${ }` become nested token streams. A `/` is taken
//! as the start of a regular expression when the previous significant token
//! cannot end an expression.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    /// Identifier or keyword.
    Word(String),
    /// `#name` class-private name.
    Private(String),
    /// Cooked string value.
    Str(String),
    /// Numeric literal, value when representable.
    Num(f64),
    Template(TemplateTok),
    Regex,
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateTok {
    pub quasis: Vec<String>,
    pub exprs: Vec<Vec<Token>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// Byte offset of the first character.
    pub start: usize,
    pub end: usize,
    /// A line terminator precedes this token.
    pub nl_before: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: &'static str,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

// Longest first.
const PUNCTS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==", "!=",
    "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "**", "<<", ">>", "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%",
    "&", "|", "^", "!", "~", "?", ":", "=", ".", "@",
];

const REGEX_AFTER_WORDS: &[&str] = &[
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void", "throw", "case", "do",
    "else", "yield", "await",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer { src, bytes: src.as_bytes(), pos: 0 };
    lx.skip_hashbang();
    lx.run(false)
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

fn is_id_start(c: char) -> bool {
    c == '$' || c == '_' || c.is_ascii_alphabetic() || (!c.is_ascii() && c.is_alphanumeric())
}

fn is_id_part(c: char) -> bool {
    is_id_start(c) || c.is_ascii_digit() || c == '\u{200c}' || c == '\u{200d}' || (!c.is_ascii() && !c.is_whitespace() && c != '\u{2028}' && c != '\u{2029}' && c != '\u{feff}' && c != '\u{a0}')
}

impl<'a> Lexer<'a> {
    fn err(&self, message: &'static str) -> LexError {
        LexError { offset: self.pos, message }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_hashbang(&mut self) {
        if self.src.starts_with("#!") {
            while let Some(c) = self.peek_char() {
                if c == '\n' {
                    break;
                }
                self.pos += c.len_utf8();
            }
        }
    }

    /// Skips whitespace and comments; returns whether a line break was seen.
    fn skip_trivia(&mut self) -> Result<bool, LexError> {
        let mut nl = false;
        while let Some(c) = self.peek_char() {
            match c {
                '\n' | '\r' | '\u{2028}' | '\u{2029}' => {
                    nl = true;
                    self.pos += c.len_utf8();
                }
                c if c.is_whitespace() || c == '\u{feff}' => self.pos += c.len_utf8(),
                '/' if self.bytes.get(self.pos + 1) == Some(&b'/') => self.skip_line(),
                '/' if self.bytes.get(self.pos + 1) == Some(&b'*') => {
                    let rest = &self.src[self.pos + 2..];
                    let end = rest.find("*/").ok_or_else(|| self.err("unterminated comment"))?;
                    if rest[..end].contains(['\n', '\r', '\u{2028}', '\u{2029}']) {
                        nl = true;
                    }
                    self.pos += 2 + end + 2;
                }
                '<' if self.src[self.pos..].starts_with("<!--") => self.skip_line(),
                '-' if nl && self.src[self.pos..].starts_with("-->") => self.skip_line(),
                _ => break,
            }
        }
        Ok(nl)
    }

    fn skip_line(&mut self) {
        while let Some(c) = self.peek_char() {
            if matches!(c, '\n' | '\r' | '\u{2028}' | '\u{2029}') {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    /// Lexes until end of input, or until the `}` closing a template
    /// substitution when `in_template` is set.
    fn run(&mut self, in_template: bool) -> Result<Vec<Token>, LexError> {
        let mut out: Vec<Token> = Vec::new();
        let mut depth = 0usize;
        loop {
            let nl_before = self.skip_trivia()?;
            let Some(c) = self.peek_char() else {
                if in_template {
                    return Err(self.err("unterminated template substitution"));
                }
                return Ok(out);
            };
            let start = self.pos;
            let tok = if is_id_start(c) || c == '\\' {
                Tok::Word(self.word()?)
            } else if c == '#' {
                self.pos += 1;
                Tok::Private(self.word()?)
            } else if c.is_ascii_digit() || (c == '.' && self.bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit)) {
                Tok::Num(self.number()?)
            } else if c == '"' || c == '\'' {
                Tok::Str(self.string(c)?)
            } else if c == '`' {
                Tok::Template(self.template()?)
            } else if c == '/' && regex_allowed(out.last()) {
                self.regex()?;
                Tok::Regex
            } else {
                let rest = &self.src[self.pos..];
                let p = PUNCTS
                    .iter()
                    .find(|p| rest.starts_with(**p))
                    .ok_or_else(|| self.err("unexpected character"))?;
                // `?.` followed by a digit is a conditional and a number.
                let p: &'static str = if *p == "?." && self.bytes.get(self.pos + 2).is_some_and(u8::is_ascii_digit) {
                    "?"
                } else {
                    p
                };
                if in_template {
                    match p {
                        "{" => depth += 1,
                        "}" if depth == 0 => {
                            self.pos += 1;
                            return Ok(out);
                        }
                        "}" => depth -= 1,
                        _ => {}
                    }
                }
                self.pos += p.len();
                Tok::Punct(p)
            };
            out.push(Token { tok, start, end: self.pos, nl_before });
        }
    }

    fn word(&mut self) -> Result<String, LexError> {
        let mut s = String::new();
        while let Some(c) = self.peek_char() {
            if c == '\\' {
                // \uXXXX or \u{...} escape inside an identifier.
                self.pos += 1;
                if self.peek_char() != Some('u') {
                    return Err(self.err("bad identifier escape"));
                }
                self.pos += 1;
                s.push(self.unicode_escape()?);
            } else if (s.is_empty() && is_id_start(c)) || (!s.is_empty() && is_id_part(c)) {
                s.push(c);
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if s.is_empty() {
            return Err(self.err("expected identifier"));
        }
        Ok(s)
    }

    fn number(&mut self) -> Result<f64, LexError> {
        let start = self.pos;
        let rest = &self.bytes[self.pos..];
        let radix = match rest {
            [b'0', b'x' | b'X', ..] => 16,
            [b'0', b'o' | b'O', ..] => 8,
            [b'0', b'b' | b'B', ..] => 2,
            _ => 10,
        };
        if radix != 10 {
            self.pos += 2;
            let digits_start = self.pos;
            while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_hexdigit() || self.bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            let digits: String = self.src[digits_start..self.pos].chars().filter(|c| *c != '_').collect();
            if self.bytes.get(self.pos) == Some(&b'n') {
                self.pos += 1;
            }
            return u64::from_str_radix(&digits, radix)
                .map(|v| v as f64)
                .or(Ok(f64::NAN));
        }
        let mut seen_dot = false;
        let mut seen_exp = false;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            match b {
                b'0'..=b'9' | b'_' => self.pos += 1,
                b'.' if !seen_dot && !seen_exp => {
                    seen_dot = true;
                    self.pos += 1;
                }
                b'e' | b'E' if !seen_exp => {
                    seen_exp = true;
                    self.pos += 1;
                    if matches!(self.bytes.get(self.pos), Some(b'+' | b'-')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let text: String = self.src[start..self.pos].chars().filter(|c| *c != '_').collect();
        if self.bytes.get(self.pos) == Some(&b'n') {
            self.pos += 1;
        }
        if self.peek_char().is_some_and(is_id_start) {
            return Err(self.err("identifier directly after number"));
        }
        Ok(text.parse::<f64>().unwrap_or(f64::NAN))
    }

    fn unicode_escape(&mut self) -> Result<char, LexError> {
        let code = if self.peek_char() == Some('{') {
            let rest = &self.src[self.pos + 1..];
            let end = rest.find('}').ok_or_else(|| self.err("bad unicode escape"))?;
            let v = u32::from_str_radix(&rest[..end], 16).map_err(|_| self.err("bad unicode escape"))?;
            self.pos += end + 2;
            v
        } else {
            let hex = self.src.get(self.pos..self.pos + 4).ok_or_else(|| self.err("bad unicode escape"))?;
            let v = u32::from_str_radix(hex, 16).map_err(|_| self.err("bad unicode escape"))?;
            self.pos += 4;
            v
        };
        Ok(char::from_u32(code).unwrap_or('\u{fffd}'))
    }

    /// Cooks one escape sequence after the backslash. Returns `None` for a
    /// line continuation.
    fn escape(&mut self) -> Result<Option<char>, LexError> {
        let c = self.peek_char().ok_or_else(|| self.err("unterminated escape"))?;
        self.pos += c.len_utf8();
        Ok(Some(match c {
            'n' => '\n',
            't' => '\t',
            'r' => '\r',
            'b' => '\u{8}',
            'f' => '\u{c}',
            'v' => '\u{b}',
            '0' if !self.peek_char().is_some_and(|d| d.is_ascii_digit()) => '\0',
            'x' => {
                let hex = self.src.get(self.pos..self.pos + 2).ok_or_else(|| self.err("bad hex escape"))?;
                let v = u8::from_str_radix(hex, 16).map_err(|_| self.err("bad hex escape"))?;
                self.pos += 2;
                v as char
            }
            'u' => self.unicode_escape()?,
            '\r' => {
                if self.peek_char() == Some('\n') {
                    self.pos += 1;
                }
                return Ok(None);
            }
            '\n' | '\u{2028}' | '\u{2029}' => return Ok(None),
            other => other,
        }))
    }

    fn string(&mut self, quote: char) -> Result<String, LexError> {
        self.pos += 1;
        let mut s = String::new();
        loop {
            let c = self.peek_char().ok_or_else(|| self.err("unterminated string"))?;
            self.pos += c.len_utf8();
            match c {
                c if c == quote => return Ok(s),
                '\\' => s.extend(self.escape()?),
                '\n' | '\r' => return Err(self.err("unterminated string")),
                c => s.push(c),
            }
        }
    }

    fn template(&mut self) -> Result<TemplateTok, LexError> {
        self.pos += 1;
        let mut quasis = Vec::new();
        let mut exprs = Vec::new();
        let mut cur = String::new();
        loop {
            let c = self.peek_char().ok_or_else(|| self.err("unterminated template"))?;
            self.pos += c.len_utf8();
            match c {
                '`' => {
                    quasis.push(cur);
                    return Ok(TemplateTok { quasis, exprs });
                }
                '\\' => {
                    // Invalid escapes are legal in tagged templates; keep raw.
                    let save = self.pos;
                    match self.escape() {
                        Ok(ch) => cur.extend(ch),
                        Err(_) => {
                            self.pos = save;
                            cur.push('\\');
                        }
                    }
                }
                '$' if self.peek_char() == Some('{') => {
                    self.pos += 1;
                    quasis.push(std::mem::take(&mut cur));
                    exprs.push(self.run(true)?);
                }
                c => cur.push(c),
            }
        }
    }

    fn regex(&mut self) -> Result<(), LexError> {
        self.pos += 1;
        let mut in_class = false;
        loop {
            let c = self.peek_char().ok_or_else(|| self.err("unterminated regex"))?;
            self.pos += c.len_utf8();
            match c {
                '\\' => {
                    let n = self.peek_char().ok_or_else(|| self.err("unterminated regex"))?;
                    self.pos += n.len_utf8();
                }
                '[' => in_class = true,
                ']' => in_class = false,
                '/' if !in_class => break,
                '\n' | '\r' => return Err(self.err("unterminated regex")),
                _ => {}
            }
        }
        while self.peek_char().is_some_and(is_id_part) {
            self.pos += 1;
        }
        Ok(())
    }
}

fn regex_allowed(prev: Option<&Token>) -> bool {
    match prev.map(|t| &t.tok) {
        None => true,
        Some(Tok::Word(w)) => REGEX_AFTER_WORDS.contains(&w.as_str()),
        Some(Tok::Punct(p)) => !matches!(*p, ")" | "]" | "++" | "--"),
        Some(_) => false,
    }
}
