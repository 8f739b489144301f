//! Flat `key = value` configuration files.
//!
//! ```text
//! # comment
//! seed = 42
//! [walker]
//! trial = gaussian
//! alpha = 1.2
//! wmat = [[0.0, 0.1],
//!         [0.1, 0.0]]
//! ```
//!
//! Values are integers, floats, booleans, bare or double-quoted strings, and
//! bracketed lists, which may nest and span lines.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Float(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(i) => (*i).into(),
            Value::Float(x) => {
                serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, Into::into)
            }
            Value::Bool(b) => (*b).into(),
            Value::Str(s) => s.clone().into(),
            Value::List(v) => v.iter().map(Value::to_json).collect(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(v) => {
                f.write_str("[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: Option<String>,
    pub key: String,
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub entries: Vec<Entry>,
    /// Section headers in order of appearance, with their line numbers.
    pub sections: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            '\\' if quoted && !escaped => {
                escaped = true;
                continue;
            }
            '"' if !escaped => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
        escaped = false;
    }
    line
}

fn bracket_depth(text: &str) -> i64 {
    let mut depth = 0;
    let mut quoted = false;
    let mut escaped = false;
    for c in text.chars() {
        match c {
            '\\' if quoted && !escaped => {
                escaped = true;
                continue;
            }
            '"' if !escaped => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => depth -= 1,
            _ => {}
        }
        escaped = false;
    }
    depth
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse(text: &str) -> Result<Document, ParseError> {
    let mut doc = Document::default();
    let mut section: Option<String> = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((lineno, raw)) = lines.next() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            if !line.contains('=') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ParseError {
                        line: lineno,
                        message: "unterminated section header".into(),
                    })?
                    .trim();
                if !is_identifier(name) {
                    return Err(ParseError {
                        line: lineno,
                        message: format!("invalid section name {name:?}"),
                    });
                }
                doc.sections.push((name.to_string(), lineno));
                section = Some(name.to_string());
                continue;
            }
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseError {
                line: lineno,
                message: format!("expected `key = value`, found {line:?}"),
            });
        };
        let key = key.trim();
        if !is_identifier(key) {
            return Err(ParseError {
                line: lineno,
                message: format!("invalid key {key:?}"),
            });
        }
        let mut value_text = value.trim().to_string();
        while bracket_depth(&value_text) > 0 {
            let Some((_, more)) = lines.next() else {
                return Err(ParseError {
                    line: lineno,
                    message: format!("unterminated list for `{key}`"),
                });
            };
            value_text.push(' ');
            value_text.push_str(strip_comment(more).trim());
        }
        if value_text.is_empty() {
            return Err(ParseError {
                line: lineno,
                message: format!("missing value for `{key}`"),
            });
        }
        let value = parse_value(&value_text).map_err(|message| ParseError {
            line: lineno,
            message,
        })?;
        if let Some(prev) = doc.entries.iter().find(|e| e.key == key) {
            return Err(ParseError {
                line: lineno,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        doc.entries.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value,
            line: lineno,
        });
    }
    Ok(doc)
}

/// Parse one value, e.g. from a `--set key=value` override.
pub fn parse_value(text: &str) -> Result<Value, String> {
    let mut p = ValueParser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(format!("unexpected trailing text in {text:?}"));
    }
    Ok(v)
}

struct ValueParser {
    chars: Vec<char>,
    pos: usize,
}

impl ValueParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn value(&mut self) -> Result<Value, String> {
        self.skip_ws();
        match self.peek() {
            None => Err("missing value".into()),
            Some('[') => self.list(),
            Some('"') => self.quoted(),
            Some(_) => self.scalar(),
        }
    }

    fn list(&mut self) -> Result<Value, String> {
        self.pos += 1;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(']') {
            self.pos += 1;
            return Ok(Value::List(items));
        }
        loop {
            items.push(self.value()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    self.skip_ws();
                    // Trailing comma.
                    if self.peek() == Some(']') {
                        self.pos += 1;
                        return Ok(Value::List(items));
                    }
                }
                Some(']') => {
                    self.pos += 1;
                    return Ok(Value::List(items));
                }
                Some(c) => return Err(format!("expected `,` or `]` in list, found {c:?}")),
                None => return Err("unterminated list".into()),
            }
        }
    }

    fn quoted(&mut self) -> Result<Value, String> {
        self.pos += 1;
        let mut s = String::new();
        while let Some(c) = self.peek() {
            self.pos += 1;
            match c {
                '"' => return Ok(Value::Str(s)),
                '\\' => match self.peek() {
                    Some(e @ ('"' | '\\')) => {
                        s.push(e);
                        self.pos += 1;
                    }
                    Some('n') => {
                        s.push('\n');
                        self.pos += 1;
                    }
                    other => return Err(format!("unsupported escape {other:?}")),
                },
                c => s.push(c),
            }
        }
        Err("unterminated string".into())
    }

    fn scalar(&mut self) -> Result<Value, String> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && c != ',' && c != ']' && c != '[')
        {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        if word.is_empty() {
            return Err(format!("unexpected {:?}", self.peek().unwrap_or(' ')));
        }
        Ok(match word.as_str() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => {
                if let Ok(i) = word.parse::<i64>() {
                    Value::Int(i)
                } else if let Ok(x) = word.parse::<f64>() {
                    if !x.is_finite() {
                        return Err(format!("non-finite number {word:?}"));
                    }
                    Value::Float(x)
                } else if word
                    .starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
                {
                    return Err(format!("malformed number {word:?}"));
                } else {
                    Value::Str(word)
                }
            }
        })
    }
}
