//! Shared pieces of the plain-text file formats: `# key = value` header
//! lines followed by a comma-separated table.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::noise::NoiseParams;

/// Ordered `key = value` pairs written as `#` comment lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    pub title: String,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(title: impl Into<String>) -> Self {
        Header {
            title: title.into(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn push_params(&mut self, params: &NoiseParams) -> &mut Self {
        self.push("p", params.p)
            .push("m", params.m)
            .push("g", params.g)
            .push("t1_over_t2", params.t1_over_t2)
            .push("t_over_t2", params.t_over_t2)
    }

    /// Parse a required field.
    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            reason: format!("header field `{key}` missing"),
        })?;
        raw.parse().map_err(|e: T::Err| Error::Parse {
            line: 0,
            reason: format!("header field `{key}` = `{raw}`: {e}"),
        })
    }

    pub fn params(&self) -> Result<NoiseParams> {
        Ok(NoiseParams::new(
            self.parse("p")?,
            self.parse("m")?,
            self.parse("g")?,
            self.parse("t1_over_t2")?,
            self.parse("t_over_t2")?,
        ))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.title);
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}

/// Split a document into its header and the remaining `(line number, line)`
/// pairs, skipping blank lines.
pub fn split_header(text: &str) -> Result<(Header, Vec<(usize, &str)>)> {
    let mut header = Header::default();
    let mut body = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            match comment.split_once('=') {
                Some((k, v)) => {
                    header
                        .entries
                        .push((k.trim().to_string(), v.trim().to_string()));
                }
                None if header.title.is_empty() => header.title = comment.to_string(),
                None => {}
            }
        } else {
            body.push((line_no, trimmed));
        }
    }
    Ok((header, body))
}

/// Parse one comma-separated field.
pub fn field<T: std::str::FromStr>(line: usize, raw: Option<&str>, what: &str) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::Parse {
        line,
        reason: format!("missing column `{what}`"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        reason: format!("column `{what}`: cannot parse `{}`", raw.trim()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let mut h = Header::new("demo");
        h.push("seed", 42)
            .push_params(&NoiseParams::new(0.0125, 0.01, 0.007, 1e4, 1e-3));
        h.push("seed", 43);
        let text = format!("{}a,b\n1,2\n", h.render());
        let (parsed, body) = split_header(&text).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(parsed.parse::<u64>("seed").unwrap(), 43);
        assert_eq!(parsed.params().unwrap().p, 0.0125);
        assert_eq!(body, vec![(8, "a,b"), (9, "1,2")]);
    }
}
