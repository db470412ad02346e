//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat;
//! callers decide whether repetition means "list" or "error".

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Malformed { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Malformed { line: i + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_skips_comments() {
        let kv = parse_kv("# c\nlabel = Z\n\nwidening= delayed:5 \n").unwrap();
        assert_eq!(kv, vec![("label".into(), "Z".into()), ("widening".into(), "delayed:5".into())]);
        assert_eq!(parse_kv("oops"), Err(ConfigError::Malformed { line: 1 }));
    }
}
