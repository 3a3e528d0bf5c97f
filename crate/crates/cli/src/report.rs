//! Reports as nested key-value documents.
//!
//! The machine form (`.kv`) has `[section.sub]` headers and `key = value`
//! lines. Decimals are written with 17 significant digits, so parsing an
//! emitted report gives back the same values.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Num(f64),
    Bool(bool),
    Text(String),
    Nums(Vec<f64>),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Nums(v)
    }
}

impl From<&[f64]> for Value {
    fn from(v: &[f64]) -> Self {
        Value::Nums(v.to_vec())
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn short(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-3..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Value {
    fn emit(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Num(v) => num(*v),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) => {
                let mut out = String::from('"');
                for ch in s.chars() {
                    match ch {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c => out.push(c),
                    }
                }
                out.push('"');
                out
            }
            Value::Nums(v) => format!(
                "[{}]",
                v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
            ),
        }
    }

    fn human(&self) -> String {
        match self {
            Value::Num(v) => short(*v),
            Value::Nums(v) => format!(
                "[{}]",
                v.iter().map(|x| short(*x)).collect::<Vec<_>>().join(", ")
            ),
            Value::Text(s) => s.clone(),
            other => other.emit(),
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        if let Some(body) = s.strip_prefix('"') {
            let body = body.strip_suffix('"').ok_or("unterminated string")?;
            let mut out = String::new();
            let mut chars = body.chars();
            while let Some(c) = chars.next() {
                if c == '\\' {
                    match chars.next() {
                        Some('n') => out.push('\n'),
                        Some(c @ ('"' | '\\')) => out.push(c),
                        other => return Err(format!("bad escape {other:?}")),
                    }
                } else {
                    out.push(c);
                }
            }
            return Ok(Value::Text(out));
        }
        if let Some(body) = s.strip_prefix('[') {
            let body = body.strip_suffix(']').ok_or("unterminated list")?.trim();
            if body.is_empty() {
                return Ok(Value::Nums(Vec::new()));
            }
            return body
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}")))
                .collect::<Result<_, _>>()
                .map(Value::Nums);
        }
        match s {
            "true" => return Ok(Value::Bool(true)),
            "false" => return Ok(Value::Bool(false)),
            _ => {}
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Value::Int(i));
        }
        s.parse::<f64>()
            .map(Value::Num)
            .map_err(|e| format!("{s}: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, Value)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        let key: String = key.into();
        self.entries
            .push((key.replace([' ', '='], "_"), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|e| e.0 == key).map(|e| &e.1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub command: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("report line {line}: {message}")]
pub struct ReportParseError {
    pub line: usize,
    pub message: String,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            sections: Vec::new(),
        }
    }

    pub fn add(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.section(section)?.get(key)
    }

    pub fn to_kv(&self) -> String {
        let mut out = format!("command = {}\n", Value::Text(self.command.clone()).emit());
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.name);
            for (k, v) in &s.entries {
                let _ = writeln!(out, "{k} = {}", v.emit());
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("blender-forge {}\n", self.command);
        for s in &self.sections {
            let _ = writeln!(out, "\n{}", s.name);
            let width = s.entries.iter().map(|e| e.0.len()).max().unwrap_or(0);
            for (k, v) in &s.entries {
                let _ = writeln!(out, "  {k:<width$}  {}", v.human());
            }
        }
        out
    }

    pub fn parse_kv(text: &str) -> Result<Self, ReportParseError> {
        let mut report = Report::default();
        let mut saw_command = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| ReportParseError {
                line: i + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                report.sections.push(Section::new(name));
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| err(format!("expected `key = value`: {line}")))?;
            let value = Value::parse(v).map_err(err)?;
            match report.sections.last_mut() {
                Some(s) => s.entries.push((k.to_string(), value)),
                None if k == "command" => match value {
                    Value::Text(c) => {
                        report.command = c;
                        saw_command = true;
                    }
                    _ => return Err(err("command must be a string".into())),
                },
                None => return Err(err(format!("`{k}` outside any section"))),
            }
        }
        if !saw_command {
            return Err(ReportParseError {
                line: 0,
                message: "missing command line".into(),
            });
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn emitted_report_parses_back() {
        let mut r = Report::new("solve");
        r.add(
            Section::new("solution")
                .with("lambda0", 0.5)
                .with("t", 3.0 * 2f64.powi(-9))
                .with("m", 8usize)
                .with("strategy", "pinned")
                .with("images", vec![0.9375, 1.0, -0.0])
                .with("ok", true),
        );
        r.add(
            Section::new("notes")
                .with("text", "a \"quoted\"\nline \\ end")
                .with("empty", Vec::<f64>::new()),
        );
        let kv = r.to_kv();
        assert!(kv.contains("lambda0 = 5.0000000000000000e-1"));
        assert_eq!(Report::parse_kv(&kv).unwrap(), r);
    }

    #[test]
    fn keys_are_sanitized() {
        let s = Section::new("v").with("spectral ordering at p", true);
        assert_eq!(s.entries[0].0, "spectral_ordering_at_p");
    }

    proptest! {
        #[test]
        fn numbers_round_trip(v in proptest::num::f64::ANY.prop_filter("nan", |v| !v.is_nan()), w in proptest::collection::vec(-1e300..1e300f64, 0..5)) {
            let r = Report {
                command: "x".into(),
                sections: vec![Section::new("s").with("v", v).with("w", w)],
            };
            prop_assert_eq!(Report::parse_kv(&r.to_kv()).unwrap(), r);
        }
    }
}
