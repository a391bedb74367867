//! Flat `key = value` text files: one entry per line, `#` starts a comment,
//! blank lines are ignored. Keys may repeat (scenario `event` lines do);
//! lookups by key take the last occurrence.

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("line {line}: key `{key}`: cannot parse `{value}` as a number")]
    NotANumber {
        line: usize,
        key: String,
        value: String,
    },
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamMap {
    entries: Vec<Entry>,
}

impl ParamMap {
    pub fn parse(text: &str) -> Result<Self, ParamError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ParamError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ParamError::Syntax {
                    line,
                    message: "empty key".to_string(),
                });
            }
            entries.push(Entry {
                line,
                key: key.to_string(),
                value: value.trim().to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Appends or overrides a value (later entries win).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push(Entry {
            line: 0,
            key: key.to_string(),
            value: value.into(),
        });
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn str(&self, key: &str) -> Result<&str, ParamError> {
        self.get(key)
            .map(|e| e.value.as_str())
            .ok_or_else(|| ParamError::MissingKey(key.to_string()))
    }

    pub fn number(&self, key: &str) -> Result<f64, ParamError> {
        let e = self
            .get(key)
            .ok_or_else(|| ParamError::MissingKey(key.to_string()))?;
        parse_number(e)
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64, ParamError> {
        match self.get(key) {
            Some(e) => parse_number(e),
            None => Ok(default),
        }
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ParamError> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        match self.entries.iter().find(|e| !allowed.contains(e.key.as_str())) {
            Some(e) => Err(ParamError::UnknownKey {
                line: e.line,
                key: e.key.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn parse_number(e: &Entry) -> Result<f64, ParamError> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParamError::NotANumber {
            line: e.line,
            key: e.key.clone(),
            value: e.value.clone(),
        }),
    }
}

/// Comma-separated numbers, e.g. `0.94, 970, 2, 2000`.
pub fn parse_number_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a number"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blank_lines_and_overrides() {
        let m = ParamMap::parse("# header\n\nr-load = 18.6  # ohm\nc-out=5.1e-4\nr-load = 20\n")
            .unwrap();
        assert_eq!(m.number("r-load").unwrap(), 20.0);
        assert_eq!(m.number("c-out").unwrap(), 5.1e-4);
        assert_eq!(m.all("r-load").count(), 2);
    }

    #[test]
    fn reports_line_numbers() {
        let err = ParamMap::parse("a = 1\nbogus line\n").unwrap_err();
        assert_eq!(
            err,
            ParamError::Syntax {
                line: 2,
                message: "expected `key = value`, found `bogus line`".into()
            }
        );
        let m = ParamMap::parse("a = 1\nb = x1\n").unwrap();
        assert!(matches!(m.number("b"), Err(ParamError::NotANumber { line: 2, .. })));
    }

    #[test]
    fn missing_and_unknown_keys() {
        let m = ParamMap::parse("a = 1\n").unwrap();
        assert_eq!(m.number("b"), Err(ParamError::MissingKey("b".into())));
        assert_eq!(m.number_or("b", 3.0), Ok(3.0));
        assert!(matches!(
            m.reject_unknown(&["b"]),
            Err(ParamError::UnknownKey { line: 1, .. })
        ));
    }

    #[test]
    fn number_lists() {
        assert_eq!(parse_number_list("0.94, 970,2 ,2000"), Ok(vec![0.94, 970.0, 2.0, 2000.0]));
        assert!(parse_number_list("1,,2").is_err());
        assert!(parse_number_list("1,inf").is_err());
    }
}
