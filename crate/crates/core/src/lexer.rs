//! Indentation-aware Python tokenizer.
//!
//! Follows the Python lexical grammar closely enough to recover the token
//! sequence of real code, but never fails: dataset snippets are fragments,
//! so unterminated strings end at the line (or file) end, unbalanced brackets
//! are tolerated and unknown characters become one-character operators.
//!
//! Normalization applied to every stream:
//! * string literals (any prefix, any quoting) become `<str>`,
//! * numeric literals become `<num>`,
//! * comments are dropped,
//! * logical line ends, indents and dedents become `<nl>`, `<ind>`, `<ded>`.
//!
//! Identifiers and keywords are kept verbatim. The spellings `<str>` and
//! `<num>` are themselves read back as string and number tokens, which lets
//! [`detokenize`] output round-trip.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NEWLINE_LEXEME: &str = "<nl>";
pub const INDENT_LEXEME: &str = "<ind>";
pub const DEDENT_LEXEME: &str = "<ded>";
pub const STRING_LEXEME: &str = "<str>";
pub const NUMBER_LEXEME: &str = "<num>";

/// Bumped whenever tokenization output changes for some input.
pub const LEXER_VERSION: u32 = 1;

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const STRING_PREFIXES: &[&str] = &["r", "u", "b", "f", "br", "rb", "fr", "rf"];

// Longest first within each length class.
const OPERATORS_3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPERATORS_2: &[&str] = &[
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", "@=", ":=",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    String,
    Operator,
    Punctuation,
    Newline,
    Indent,
    Dedent,
    Comment,
}

impl TokenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Identifier => "identifier",
            TokenKind::Keyword => "keyword",
            TokenKind::Number => "number",
            TokenKind::String => "string",
            TokenKind::Operator => "operator",
            TokenKind::Punctuation => "punctuation",
            TokenKind::Newline => "newline",
            TokenKind::Indent => "indent",
            TokenKind::Dedent => "dedent",
            TokenKind::Comment => "comment",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
}

impl Token {
    pub fn new(kind: TokenKind, lexeme: impl Into<String>) -> Self {
        Token {
            kind,
            lexeme: lexeme.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub source_id: String,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lexemes(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.lexeme.as_str())
    }

    /// Indents and dedents pair up, and no prefix closes more blocks than it opened.
    pub fn is_balanced(&self) -> bool {
        let mut depth: i64 = 0;
        for t in &self.tokens {
            match t.kind {
                TokenKind::Indent => depth += 1,
                TokenKind::Dedent => depth -= 1,
                _ => {}
            }
            if depth < 0 {
                return false;
            }
        }
        depth == 0
    }
}

fn is_punctuation(op: &str) -> bool {
    matches!(op, "(" | ")" | "[" | "]" | "{" | "}" | "," | ":" | ";" | "." | "...")
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

struct Lexer<'a> {
    chars: &'a [char],
    pos: usize,
    tokens: Vec<Token>,
    indents: Vec<usize>,
    bracket_depth: usize,
    line_has_tokens: bool,
    /// Indentation of the current line, applied when its first token arrives.
    pending_indent: Option<usize>,
}

impl<'a> Lexer<'a> {
    fn peek(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.chars.get(self.pos + i) == Some(&c))
    }

    fn push(&mut self, kind: TokenKind, lexeme: &str) {
        if !matches!(kind, TokenKind::Indent | TokenKind::Dedent | TokenKind::Newline) {
            if let Some(col) = self.pending_indent.take() {
                self.set_indent(col);
            }
        }
        self.tokens.push(Token::new(kind, lexeme));
        if !matches!(kind, TokenKind::Indent | TokenKind::Dedent) {
            self.line_has_tokens = !matches!(kind, TokenKind::Newline);
        }
    }

    /// Length of the line break at the cursor: 2 for CRLF, 1 for LF or CR.
    fn newline_len(&self) -> Option<usize> {
        match (self.peek(0), self.peek(1)) {
            (Some('\r'), Some('\n')) => Some(2),
            (Some('\r'), _) | (Some('\n'), _) => Some(1),
            _ => None,
        }
    }

    fn skip_to_line_end(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == '\n' || c == '\r' {
                break;
            }
            self.pos += 1;
        }
    }

    /// Handles the start of a physical line outside brackets. Blank and
    /// comment-only lines are consumed without producing tokens.
    fn line_start(&mut self) -> bool {
        loop {
            let mut col = 0usize;
            while let Some(c) = self.peek(0) {
                match c {
                    ' ' => col += 1,
                    '\t' => col = (col / 8 + 1) * 8,
                    '\x0c' => col = 0,
                    _ => break,
                }
                self.pos += 1;
            }
            match self.peek(0) {
                None => return false,
                Some('#') => {
                    self.skip_to_line_end();
                    if let Some(n) = self.newline_len() {
                        self.pos += n;
                    }
                }
                Some('\n') | Some('\r') => self.pos += self.newline_len().unwrap_or(1),
                Some(_) => {
                    self.pending_indent = Some(col);
                    return true;
                }
            }
        }
    }

    /// Emits dedents while the enclosing block is at least as deep as `col`.
    /// A dedent to a column between two open levels narrows the innermost
    /// level instead of failing, so the stream stays balanced.
    fn set_indent(&mut self, col: usize) {
        while self.indents.len() > 1 && self.indents[self.indents.len() - 2] >= col {
            self.indents.pop();
            self.push(TokenKind::Dedent, DEDENT_LEXEME);
        }
        let top = *self.indents.last().expect("indent stack is never empty");
        if col > top {
            self.indents.push(col);
            self.push(TokenKind::Indent, INDENT_LEXEME);
        } else if col < top {
            *self.indents.last_mut().expect("indent stack is never empty") = col;
        }
    }

    fn lex_string(&mut self) {
        let quote = self.peek(0).expect("string start");
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        while let Some(c) = self.peek(0) {
            if c == '\\' {
                self.pos += 1;
                match self.newline_len() {
                    Some(n) => self.pos += n,
                    None if self.peek(0).is_some() => self.pos += 1,
                    None => {}
                }
                continue;
            }
            if c == quote {
                if !triple {
                    self.pos += 1;
                    break;
                }
                if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                    self.pos += 3;
                    break;
                }
            }
            if !triple && (c == '\n' || c == '\r') {
                break;
            }
            self.pos += 1;
        }
        self.push(TokenKind::String, STRING_LEXEME);
    }

    fn lex_number(&mut self) {
        let digits = |lx: &mut Lexer, radix_ok: &dyn Fn(char) -> bool| {
            while let Some(c) = lx.peek(0) {
                if c == '_' || radix_ok(c) {
                    lx.pos += 1;
                } else {
                    break;
                }
            }
        };
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            self.pos += 2;
            digits(self, &|c| c.is_ascii_hexdigit());
        } else {
            digits(self, &|c| c.is_ascii_digit());
            if self.peek(0) == Some('.') {
                self.pos += 1;
                digits(self, &|c| c.is_ascii_digit());
            }
            if matches!(self.peek(0), Some('e' | 'E')) {
                let sign = usize::from(matches!(self.peek(1), Some('+' | '-')));
                if self.peek(1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1 + sign;
                    digits(self, &|c| c.is_ascii_digit());
                }
            }
            if matches!(self.peek(0), Some('j' | 'J')) {
                self.pos += 1;
            }
        }
        self.push(TokenKind::Number, NUMBER_LEXEME);
    }

    fn lex_name(&mut self) {
        let start = self.pos;
        while self.peek(0).is_some_and(is_ident_continue) {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        if matches!(self.peek(0), Some('"' | '\'')) && STRING_PREFIXES.contains(&name.to_ascii_lowercase().as_str()) {
            self.lex_string();
            return;
        }
        let kind = if KEYWORDS.contains(&name.as_str()) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, &name);
    }

    fn lex_operator(&mut self) {
        for table in [OPERATORS_3, OPERATORS_2] {
            if let Some(op) = table.iter().find(|op| self.starts_with(op)) {
                self.pos += op.chars().count();
                let kind = if is_punctuation(op) {
                    TokenKind::Punctuation
                } else {
                    TokenKind::Operator
                };
                self.push(kind, op);
                return;
            }
        }
        let c = self.peek(0).expect("operator start");
        self.pos += 1;
        match c {
            '(' | '[' | '{' => self.bracket_depth += 1,
            ')' | ']' | '}' => self.bracket_depth = self.bracket_depth.saturating_sub(1),
            _ => {}
        }
        let lexeme = c.to_string();
        let kind = if is_punctuation(&lexeme) {
            TokenKind::Punctuation
        } else {
            TokenKind::Operator
        };
        self.push(kind, &lexeme);
    }

    fn run(mut self) -> Vec<Token> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.bracket_depth == 0 {
                if !self.line_start() {
                    break;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek(0) else { break };
            match c {
                ' ' | '\t' | '\x0c' => self.pos += 1,
                '\n' | '\r' => {
                    self.pos += self.newline_len().unwrap_or(1);
                    if self.bracket_depth == 0 {
                        self.pending_indent = None;
                        if self.line_has_tokens {
                            self.push(TokenKind::Newline, NEWLINE_LEXEME);
                        }
                        at_line_start = true;
                    }
                }
                '#' => self.skip_to_line_end(),
                '\\' if matches!(self.peek(1), Some('\n' | '\r')) => {
                    self.pos += 1;
                    self.pos += self.newline_len().unwrap_or(0);
                }
                '"' | '\'' => self.lex_string(),
                '<' if self.starts_with(STRING_LEXEME) => {
                    self.pos += STRING_LEXEME.len();
                    self.push(TokenKind::String, STRING_LEXEME);
                }
                '<' if self.starts_with(NUMBER_LEXEME) => {
                    self.pos += NUMBER_LEXEME.len();
                    self.push(TokenKind::Number, NUMBER_LEXEME);
                }
                c if c.is_ascii_digit() => self.lex_number(),
                '.' if self.peek(1).is_some_and(|d| d.is_ascii_digit()) => self.lex_number(),
                c if is_ident_start(c) => self.lex_name(),
                _ => self.lex_operator(),
            }
        }
        if self.line_has_tokens {
            self.push(TokenKind::Newline, NEWLINE_LEXEME);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, DEDENT_LEXEME);
        }
        self.tokens
    }
}

/// Tokenizes source text. Total: every input produces a stream.
pub fn tokenize(code: &str) -> TokenStream {
    tokenize_with_id(code, "")
}

pub fn tokenize_with_id(code: &str, source_id: impl Into<String>) -> TokenStream {
    let chars: Vec<char> = code.chars().collect();
    let lexer = Lexer {
        chars: &chars,
        pos: 0,
        tokens: Vec::new(),
        indents: vec![0],
        bracket_depth: 0,
        line_has_tokens: false,
        pending_indent: None,
    };
    TokenStream {
        tokens: lexer.run(),
        source_id: source_id.into(),
    }
}

/// Like [`tokenize`], for raw bytes that may not be UTF-8.
pub fn tokenize_bytes(bytes: &[u8]) -> Result<TokenStream> {
    let code = std::str::from_utf8(bytes).map_err(|e| Error::InvalidUtf8(e.valid_up_to()))?;
    Ok(tokenize(code))
}

/// Renders a stream as source text: one space between tokens, four spaces
/// per block level, `\n` for each newline token. Tokenizing the result gives
/// back the same kinds and lexemes.
pub fn detokenize(stream: &TokenStream) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let mut at_line_start = true;
    for tok in &stream.tokens {
        match tok.kind {
            TokenKind::Indent => depth += 1,
            TokenKind::Dedent => depth = depth.saturating_sub(1),
            TokenKind::Newline => {
                // A trailing backslash would otherwise read as a line continuation.
                if out.ends_with('\\') {
                    out.push(' ');
                }
                out.push('\n');
                at_line_start = true;
            }
            TokenKind::Comment => {}
            _ => {
                if at_line_start {
                    out.extend(std::iter::repeat("    ").take(depth));
                    at_line_start = false;
                } else {
                    out.push(' ');
                }
                out.push_str(&tok.lexeme);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use TokenKind::{Dedent, Identifier, Indent, Keyword, Newline, Number, Operator, Punctuation, String as Str};

    fn kinds(code: &str) -> Vec<TokenKind> {
        tokenize(code).tokens.iter().map(|t| t.kind).collect()
    }

    fn pairs(code: &str) -> Vec<(TokenKind, String)> {
        tokenize(code).tokens.into_iter().map(|t| (t.kind, t.lexeme)).collect()
    }

    fn tok(kind: TokenKind, lexeme: &str) -> (TokenKind, String) {
        (kind, lexeme.to_string())
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(
            pairs("x = 1"),
            vec![tok(Identifier, "x"), tok(Operator, "="), tok(Number, "<num>"), tok(Newline, "<nl>")]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("\n\n   \n# only a comment\n").is_empty());
    }

    #[test]
    fn function_block() {
        assert_eq!(
            kinds("def f():\n    return x"),
            vec![Keyword, Identifier, Punctuation, Punctuation, Punctuation, Newline, Indent, Keyword, Identifier, Newline, Dedent]
        );
    }

    #[test]
    fn literals_are_normalized() {
        let code = "s = r'a\\'b' + b\"\"\"multi\nline\"\"\" + 0x_ff + 1.5e-3j + .5\n";
        let lex: Vec<String> = tokenize(code).lexemes().map(String::from).collect();
        assert_eq!(lex, ["s", "=", "<str>", "+", "<str>", "+", "<num>", "+", "<num>", "+", "<num>", "<nl>"]);
    }

    #[test]
    fn comments_are_dropped() {
        assert_eq!(pairs("x = 1  # set x\n"), pairs("x = 1\n"));
    }

    #[test]
    fn brackets_join_lines() {
        assert_eq!(
            kinds("f(a,\n  b)\n"),
            vec![Identifier, Punctuation, Identifier, Punctuation, Identifier, Punctuation, Newline]
        );
        assert_eq!(kinds("x = 1 + \\\n    2\n"), kinds("x = 1 + 2\n"));
    }

    #[test]
    fn operators_use_longest_match() {
        let lex: Vec<String> = tokenize("a **= b // c -> d != e := f ... g").lexemes().map(String::from).collect();
        assert_eq!(lex, ["a", "**=", "b", "//", "c", "->", "d", "!=", "e", ":=", "f", "...", "g", "<nl>"]);
    }

    #[test]
    fn unknown_characters_become_operators() {
        assert_eq!(
            pairs("a $ b ?"),
            vec![tok(Identifier, "a"), tok(Operator, "$"), tok(Identifier, "b"), tok(Operator, "?"), tok(Newline, "<nl>")]
        );
    }

    #[test]
    fn unterminated_strings_end_at_line() {
        assert_eq!(
            pairs("x = 'abc\ny = 2"),
            vec![
                tok(Identifier, "x"),
                tok(Operator, "="),
                tok(Str, "<str>"),
                tok(Newline, "<nl>"),
                tok(Identifier, "y"),
                tok(Operator, "="),
                tok(Number, "<num>"),
                tok(Newline, "<nl>"),
            ]
        );
        assert_eq!(kinds("x = '''never closed\n\n"), vec![Identifier, Operator, Str, Newline]);
    }

    #[test]
    fn inconsistent_dedent_stays_balanced() {
        let s = tokenize("if a:\n        b\n    c\n    d\n");
        assert!(s.is_balanced());
        assert_eq!(s.tokens.iter().filter(|t| t.kind == Indent).count(), 1);
        let again = tokenize(&detokenize(&s));
        assert_eq!(again.tokens, s.tokens);
    }

    #[test]
    fn fragment_starting_indented() {
        let s = tokenize("    return x\n");
        assert_eq!(s.tokens.first().map(|t| t.kind), Some(Indent));
        assert!(s.is_balanced());
    }

    #[test]
    fn detokenize_examples() {
        let s = TokenStream {
            tokens: vec![
                Token::new(Identifier, "x"),
                Token::new(Operator, "="),
                Token::new(Number, NUMBER_LEXEME),
                Token::new(Newline, NEWLINE_LEXEME),
            ],
            source_id: String::new(),
        };
        assert_eq!(detokenize(&s), "x = <num>\n");
        assert_eq!(detokenize(&TokenStream::default()), "");
    }

    #[test]
    fn crlf_and_tabs() {
        assert_eq!(pairs("if a:\r\n\tb\r\n"), pairs("if a:\n        b\n"));
    }

    #[test]
    fn invalid_utf8_is_the_only_error() {
        assert!(matches!(tokenize_bytes(b"ok = 1\n\xff"), Err(Error::InvalidUtf8(7))));
        assert_eq!(tokenize_bytes(b"x = 1").unwrap(), tokenize("x = 1"));
    }

    #[test]
    fn unicode_identifiers() {
        assert_eq!(pairs("caf\u{e9} = 1")[0], tok(Identifier, "caf\u{e9}"));
    }

    const PYTHONISH: &str = "[a-z_ ]{0,6}|[0-9.]{1,4}|'[a-z]{0,3}'?|\"\"\"|[-+*/%<>=!:;,.()\\[\\]{}@#$\\\\]{1,2}|\\n[ \\t]{0,9}|\\r\\n|<str>|<num>|\\PC";

    proptest! {
        #[test]
        fn total_balanced_and_deterministic(code in "\\PC*") {
            let s = tokenize(&code);
            prop_assert!(s.is_balanced());
            prop_assert_eq!(&s, &tokenize(&code));
        }

        #[test]
        fn structured_input_balanced(parts in proptest::collection::vec(PYTHONISH, 0..40)) {
            let code = parts.concat();
            let s = tokenize(&code);
            prop_assert!(s.is_balanced());
            for t in &s.tokens {
                match t.kind {
                    Newline | Indent | Dedent => {}
                    _ => prop_assert!(!t.lexeme.is_empty()),
                }
            }
        }

        #[test]
        fn detokenize_round_trips(parts in proptest::collection::vec(PYTHONISH, 0..40)) {
            let s = tokenize(&parts.concat());
            let again = tokenize(&detokenize(&s));
            prop_assert_eq!(again.tokens, s.tokens);
        }
    }
}
