use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::{ParseError, SourceSpan};

/// Longest fractional part a numeric literal may carry.
pub const MAX_FRACTION_DIGITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Tree,
    Or,
    And,
    Leaf,
    Prob,
    Cost,
    Impact,
    Skill,
    Threat,
    Counter,
    Controls,
    Threats,
    Control,
    ThreatEntry,
    Type,
    Value,
    Effectiveness,
    Final,
    Iso,
    Gdpr,
    Stride,
    Asset,
    Desc,
    Vuln,
}

impl Keyword {
    pub const ALL: [Keyword; 24] = [
        Keyword::Tree,
        Keyword::Or,
        Keyword::And,
        Keyword::Leaf,
        Keyword::Prob,
        Keyword::Cost,
        Keyword::Impact,
        Keyword::Skill,
        Keyword::Threat,
        Keyword::Counter,
        Keyword::Controls,
        Keyword::Threats,
        Keyword::Control,
        Keyword::ThreatEntry,
        Keyword::Type,
        Keyword::Value,
        Keyword::Effectiveness,
        Keyword::Final,
        Keyword::Iso,
        Keyword::Gdpr,
        Keyword::Stride,
        Keyword::Asset,
        Keyword::Desc,
        Keyword::Vuln,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Tree => "tree",
            Keyword::Or => "or",
            Keyword::And => "and",
            Keyword::Leaf => "leaf",
            Keyword::Prob => "prob",
            Keyword::Cost => "cost",
            Keyword::Impact => "impact",
            Keyword::Skill => "skill",
            Keyword::Threat => "threat",
            Keyword::Counter => "counter",
            Keyword::Controls => "controls",
            Keyword::Threats => "threats",
            Keyword::Control => "control",
            Keyword::ThreatEntry => "threat-entry",
            Keyword::Type => "type",
            Keyword::Value => "value",
            Keyword::Effectiveness => "effectiveness",
            Keyword::Final => "final",
            Keyword::Iso => "iso",
            Keyword::Gdpr => "gdpr",
            Keyword::Stride => "stride",
            Keyword::Asset => "asset",
            Keyword::Desc => "desc",
            Keyword::Vuln => "vuln",
        }
    }

    fn from_word(word: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == word)
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    Eof,
}

impl TokenKind {
    /// Kind without payload, for comparing token streams.
    pub fn tag(&self) -> &'static str {
        match self {
            TokenKind::Keyword(k) => k.as_str(),
            TokenKind::Ident(_) => "identifier",
            TokenKind::Number(_) => "number",
            TokenKind::Str(_) => "string",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text of the token, quotes and escapes included.
    pub lexeme: String,
    pub span: SourceSpan,
}

impl Token {
    pub(crate) fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Eof => "end of input".to_string(),
            _ => format!("`{}`", self.lexeme),
        }
    }
}

/// Splits DSL source into tokens, skipping whitespace and `#` comments.
/// The last token is always [`TokenKind::Eof`].
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    Lexer::new(source, None).run()
}

pub(crate) fn tokenize_in(source: &str, file: Option<Arc<Path>>) -> Result<Vec<Token>, ParseError> {
    Lexer::new(source, file).run()
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

struct Lexer<'s> {
    src: &'s str,
    file: Option<Arc<Path>>,
    offset: usize,
    line: usize,
    column: usize,
}

impl<'s> Lexer<'s> {
    fn new(src: &'s str, file: Option<Arc<Path>>) -> Self {
        Self {
            src,
            file,
            offset: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.offset..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: (usize, usize, usize)) -> SourceSpan {
        SourceSpan {
            file: self.file.clone(),
            line: start.1,
            column: start.2,
            offset: start.0,
            length: self.offset - start.0,
        }
    }

    fn error(&self, start: (usize, usize, usize), expected: &str, found: String) -> ParseError {
        let mut span = self.span_from(start);
        span.length = span.length.max(1);
        ParseError::syntax(span, expected, found)
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_trivia();
            let start = (self.offset, self.line, self.column);
            let Some(c) = self.peek() else {
                tokens.push(Token {
                    kind: TokenKind::Eof,
                    lexeme: String::new(),
                    span: self.span_from(start),
                });
                return Ok(tokens);
            };
            let kind = match c {
                '{' => {
                    self.bump();
                    TokenKind::LBrace
                }
                '}' => {
                    self.bump();
                    TokenKind::RBrace
                }
                '"' => self.string(start)?,
                c if c.is_ascii_digit() => self.number(start)?,
                c if is_ident_start(c) => self.word(),
                other => {
                    self.bump();
                    return Err(self.error(start, "a token", format!("`{other}`")));
                }
            };
            tokens.push(Token {
                kind,
                lexeme: self.src[start.0..self.offset].to_string(),
                span: self.span_from(start),
            });
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn string(&mut self, start: (usize, usize, usize)) -> Result<TokenKind, ParseError> {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(TokenKind::Str(value)),
                Some('\\') => match self.bump() {
                    Some(c @ ('"' | '\\')) => value.push(c),
                    Some(other) => {
                        return Err(self.error(start, "`\\\"` or `\\\\` escape", format!("`\\{other}`")))
                    }
                    None => return Err(self.error(start, "closing `\"`", "end of input".into())),
                },
                Some('\n') | None => {
                    return Err(self.error(start, "closing `\"`", "end of line".into()));
                }
                Some(c) => value.push(c),
            }
        }
    }

    fn number(&mut self, start: (usize, usize, usize)) -> Result<TokenKind, ParseError> {
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            let frac_start = self.offset;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            let digits = self.offset - frac_start;
            if digits > MAX_FRACTION_DIGITS {
                return Err(self.error(
                    start,
                    "a number with at most 6 fractional digits",
                    format!("`{}`", &self.src[start.0..self.offset]),
                ));
            }
        }
        let text = &self.src[start.0..self.offset];
        text.parse()
            .map(TokenKind::Number)
            .map_err(|_| self.error(start, "a number", format!("`{text}`")))
    }

    fn word(&mut self) -> TokenKind {
        let start = self.offset;
        while self.peek().is_some_and(is_ident_continue) {
            self.bump();
        }
        let word = &self.src[start..self.offset];
        if word == "threat" && self.src[self.offset..].starts_with("-entry") {
            let after = self.src[self.offset + "-entry".len()..].chars().next();
            if !after.is_some_and(is_ident_continue) {
                for _ in 0.."-entry".len() {
                    self.bump();
                }
                return TokenKind::Keyword(Keyword::ThreatEntry);
            }
        }
        match Keyword::from_word(word) {
            Some(k) => TokenKind::Keyword(k),
            None => TokenKind::Ident(word.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn leaf_header() {
        assert_eq!(
            kinds(r#"leaf H_A.1.1 "Eavesdrop" { prob 0.7 }"#),
            vec![
                TokenKind::Keyword(Keyword::Leaf),
                TokenKind::Ident("H_A.1.1".into()),
                TokenKind::Str("Eavesdrop".into()),
                TokenKind::LBrace,
                TokenKind::Keyword(Keyword::Prob),
                TokenKind::Number(0.7),
                TokenKind::RBrace,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("# comment\n"), vec![TokenKind::Eof]);
        assert_eq!(kinds("tree # trailing\r\n{"), vec![
            TokenKind::Keyword(Keyword::Tree),
            TokenKind::LBrace,
            TokenKind::Eof
        ]);
    }

    #[test]
    fn illegal_character() {
        let err = tokenize("prob 0.7$").unwrap_err();
        assert_eq!((err.span.line, err.span.column, err.span.offset), (1, 9, 8));
        assert_eq!(err.found, "`$`");
    }

    #[test]
    fn string_escapes() {
        assert_eq!(kinds(r#""say \"hi\" \\ ok""#)[0], TokenKind::Str(r#"say "hi" \ ok"#.into()));
        assert!(tokenize(r#""bad \n escape""#).is_err());
        assert!(tokenize("\"unterminated").is_err());
    }

    #[test]
    fn threat_entry_keyword() {
        assert_eq!(kinds("threat-entry")[0], TokenKind::Keyword(Keyword::ThreatEntry));
        assert_eq!(kinds("threat B1")[0], TokenKind::Keyword(Keyword::Threat));
        assert!(tokenize("threat-entryx").is_err());
    }

    #[test]
    fn number_precision_limit() {
        assert_eq!(kinds("0.123456")[0], TokenKind::Number(0.123456));
        let err = tokenize("0.1234567").unwrap_err();
        assert!(err.expected.contains("6 fractional digits"));
        assert!(tokenize("1.").is_err());
    }

    #[test]
    fn positions_track_lines() {
        let toks = tokenize("tree\n  \"x\" {").unwrap();
        assert_eq!((toks[1].span.line, toks[1].span.column, toks[1].span.length), (2, 3, 3));
    }

    fn lexeme() -> impl Strategy<Value = String> {
        prop_oneof![
            prop::sample::select(Keyword::ALL.to_vec()).prop_map(|k| k.as_str().to_string()),
            "[A-Za-z_][A-Za-z0-9_.]{0,8}",
            "[0-9]{1,4}(\\.[0-9]{1,6})?",
            "\"([a-z ]|\\\\\"|\\\\\\\\){0,10}\"",
            Just("{".to_string()),
            Just("}".to_string()),
        ]
    }

    proptest! {
        #[test]
        fn relexing_joined_lexemes_keeps_kinds(parts in prop::collection::vec(lexeme(), 0..20)) {
            let src = parts.join(" ");
            if let Ok(tokens) = tokenize(&src) {
                let joined = tokens.iter().map(|t| t.lexeme.as_str()).collect::<Vec<_>>().join(" ");
                let again = tokenize(&joined).unwrap();
                let a: Vec<_> = tokens.iter().map(|t| t.kind.tag()).collect();
                let b: Vec<_> = again.iter().map(|t| t.kind.tag()).collect();
                prop_assert_eq!(a, b);
                for t in &tokens {
                    prop_assert!(t.span.offset + t.span.length <= src.len());
                }
            }
        }
    }
}
