//! Line-oriented configuration files:
//!
//! ```text
//! # comment
//! [section]
//! key = 1.5
//! flag = true
//! expr = "sin(t) * 2"
//! list = 0.2, 0.1, "cos(t)"
//! ```

use std::fmt;

use twotime_core::expr::Expression;
use twotime_core::harness::format_float;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, if the error is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a.to_bits() == b.to_bits(),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => f.write_str(&format_float(*x)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::List(items) => {
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

/// Parsed configuration, sections and keys in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub sections: Vec<Section>,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

// Strips a trailing comment, respecting quoted strings.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_items(text: &str, line: usize) -> Result<Vec<String>, ConfigError> {
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    let mut escaped = false;
    for c in text.chars() {
        if escaped {
            cur.push(c);
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_str => {
                cur.push(c);
                escaped = true;
            }
            '"' => {
                in_str = !in_str;
                cur.push(c);
            }
            ',' if !in_str => items.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    if in_str {
        return Err(ConfigError::at(line, "unterminated string"));
    }
    items.push(cur);
    Ok(items)
}

fn parse_scalar(raw: &str, line: usize) -> Result<Value, ConfigError> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(ConfigError::at(line, "empty value"));
    }
    if let Some(body) = s.strip_prefix('"') {
        let Some(body) = body.strip_suffix('"') else {
            return Err(ConfigError::at(line, format!("malformed string {s}")));
        };
        let mut out = String::new();
        let mut chars = body.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some(e @ ('"' | '\\')) => out.push(e),
                    _ => return Err(ConfigError::at(line, "bad escape in string")),
                },
                '"' => return Err(ConfigError::at(line, format!("malformed string {s}"))),
                c => out.push(c),
            }
        }
        return Ok(Value::Str(out));
    }
    match s {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    s.parse::<f64>().map(Value::Number).map_err(|_| {
        ConfigError::at(
            line,
            format!("cannot read `{s}`: expected a number, true/false or a double-quoted string"),
        )
    })
}

fn parse_value(raw: &str, line: usize) -> Result<Value, ConfigError> {
    let items = split_items(raw, line)?;
    if items.len() == 1 {
        parse_scalar(&items[0], line)
    } else {
        Ok(Value::List(
            items
                .iter()
                .map(|i| parse_scalar(i, line))
                .collect::<Result<_, _>>()?,
        ))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| is_identifier(n))
                    .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{content}`")))?;
                if cfg.section(name).is_some() {
                    return Err(ConfigError::at(line, format!("section [{name}] appears twice")));
                }
                cfg.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, "expected `key = value`"))?;
            let key = key.trim();
            if !is_identifier(key) {
                return Err(ConfigError::at(line, format!("invalid key `{key}`")));
            }
            let value = parse_value(value, line)?;
            let section = cfg
                .sections
                .last_mut()
                .ok_or_else(|| ConfigError::at(line, "key outside of any [section]"))?;
            if section.entry(key).is_some() {
                return Err(ConfigError::at(line, format!("key `{key}` set twice in [{}]", section.name)));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value,
                line,
            });
        }
        Ok(cfg)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.section(name).is_some()
    }

    /// Rejects sections and keys outside `schema`.
    pub fn check_schema(&self, schema: &[(&str, &[&str])]) -> Result<(), ConfigError> {
        for s in &self.sections {
            let Some((_, keys)) = schema.iter().find(|(n, _)| *n == s.name) else {
                return Err(ConfigError::at(s.line, format!("unknown section [{}]", s.name)));
            };
            for e in &s.entries {
                let known = keys.iter().any(|k| {
                    *k == e.key || k.strip_suffix('*').is_some_and(|prefix| e.key.starts_with(prefix))
                });
                if !known {
                    return Err(ConfigError::at(
                        e.line,
                        format!("unknown key `{}` in [{}]", e.key, s.name),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entry(key)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        match self.section(section) {
            None => Err(ConfigError::general(format!("missing section [{section}] (needs key `{key}`)"))),
            Some(s) => s.entry(key).ok_or_else(|| {
                ConfigError::at(s.line, format!("missing required key `{key}` in [{section}]"))
            }),
        }
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(section, key).map(as_f64).transpose()
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        as_f64(self.require(section, key)?)
    }

    pub fn usize_opt(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(section, key).map(as_usize).transpose()
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        as_usize(self.require(section, key)?)
    }

    pub fn bool_opt(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(section, key)
            .map(|e| match e.value {
                Value::Bool(b) => Ok(b),
                _ => Err(ConfigError::at(e.line, format!("`{}` must be true or false", e.key))),
            })
            .transpose()
    }

    pub fn str_opt(&self, section: &str, key: &str) -> Result<Option<&str>, ConfigError> {
        self.get(section, key)
            .map(|e| match &e.value {
                Value::Str(s) => Ok(s.as_str()),
                _ => Err(ConfigError::at(e.line, format!("`{}` must be a double-quoted string", e.key))),
            })
            .transpose()
    }

    pub fn str(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.require(section, key)?;
        Ok(self.str_opt(section, key)?.expect("checked above"))
    }

    /// A list of numbers (a single number is a one-element list).
    pub fn f64_list_opt(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(section, key).map(as_f64_list).transpose()
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        as_f64_list(self.require(section, key)?)
    }

    /// A list of expressions; numbers are read as constants.
    pub fn expr_list_opt(&self, section: &str, key: &str) -> Result<Option<Vec<Expression>>, ConfigError> {
        self.get(section, key).map(as_expr_list).transpose()
    }

    pub fn expr_list(&self, section: &str, key: &str) -> Result<Vec<Expression>, ConfigError> {
        as_expr_list(self.require(section, key)?)
    }

    pub fn expr_opt(&self, section: &str, key: &str) -> Result<Option<Expression>, ConfigError> {
        self.get(section, key)
            .map(|e| {
                let mut v = as_expr_list(e)?;
                if v.len() != 1 {
                    return Err(ConfigError::at(e.line, format!("`{}` must be a single expression", e.key)));
                }
                Ok(v.remove(0))
            })
            .transpose()
    }

    pub fn expr(&self, section: &str, key: &str) -> Result<Expression, ConfigError> {
        self.require(section, key)?;
        Ok(self.expr_opt(section, key)?.expect("checked above"))
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{}]", s.name)?;
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
        }
        Ok(())
    }
}

fn as_f64(e: &Entry) -> Result<f64, ConfigError> {
    match e.value {
        Value::Number(x) => Ok(x),
        _ => Err(ConfigError::at(e.line, format!("`{}` must be a number", e.key))),
    }
}

fn as_usize(e: &Entry) -> Result<usize, ConfigError> {
    let x = as_f64(e)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(ConfigError::at(e.line, format!("`{}` must be a non-negative integer", e.key)))
    }
}

fn items(e: &Entry) -> Vec<&Value> {
    match &e.value {
        Value::List(v) => v.iter().collect(),
        v => vec![v],
    }
}

fn as_f64_list(e: &Entry) -> Result<Vec<f64>, ConfigError> {
    items(e)
        .into_iter()
        .map(|v| match v {
            Value::Number(x) => Ok(*x),
            _ => Err(ConfigError::at(e.line, format!("`{}` must be a list of numbers", e.key))),
        })
        .collect()
}

fn as_expr_list(e: &Entry) -> Result<Vec<Expression>, ConfigError> {
    items(e)
        .into_iter()
        .map(|v| match v {
            Value::Number(x) => Ok(Expression::constant(*x)),
            Value::Str(s) => Expression::parse(s)
                .map_err(|err| ConfigError::at(e.line, format!("in `{}`: {err}", e.key))),
            _ => Err(ConfigError::at(e.line, format!("`{}` must hold expressions", e.key))),
        })
        .collect()
}
