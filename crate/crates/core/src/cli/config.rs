//! Flat `key = value` configuration with command-line overrides.

use super::CliError;
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "config line {n}"),
            Origin::Override => write!(f, "command-line override"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, Origin)>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Config {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// duplicate keys are rejected.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Config { line, msg: format!("expected `key = value`, got `{content}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if !valid_key(key) {
                return Err(CliError::Config { line, msg: format!("invalid key `{key}`") });
            }
            if value.is_empty() {
                return Err(CliError::Config { line, msg: format!("missing value for `{key}`") });
            }
            if let Some((_, prev)) = cfg.entries.get(key) {
                return Err(CliError::Config { line, msg: format!("duplicate key `{key}` (first set at {prev})") });
            }
            cfg.entries.insert(key.to_string(), (value.to_string(), Origin::Line(line)));
        }
        Ok(cfg)
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set_override(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !valid_key(key) {
            return Err(CliError::Usage(format!("invalid override key `--{key}`")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), Origin::Override));
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Error for `key`, pointing at the config line that set it.
    pub fn error_at(&self, key: &str, msg: String) -> CliError {
        match self.entries.get(key).map(|e| e.1) {
            Some(Origin::Line(line)) => CliError::Config { line, msg },
            _ => CliError::Usage(format!("--{key}: {msg}")),
        }
    }

    /// Rejects any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str], context: &str) -> Result<(), CliError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.error_at(k, format!("unknown key `{k}` for {context} (allowed: {})", allowed.join(", ")))),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Parses `key` with a custom parser, attributing failures to its origin.
    pub fn get_with<T>(&self, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|msg| self.error_at(key, format!("`{key}`: {msg}"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get_with(key, |v| v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Rejects a present value that fails `ok`.
    pub fn check<T: Copy>(&self, key: &str, value: T, ok: bool, what: &str) -> Result<T, CliError> {
        if ok {
            Ok(value)
        } else {
            Err(self.error_at(key, format!("`{key}` must be {what}")))
        }
    }
}

/// Parses a real constant, optionally written as `a*name` or `name` for one
/// of the given named values.
pub fn parse_real(token: &str, names: &[(&str, f64)]) -> Result<f64, String> {
    let token = token.trim();
    let lookup = |t: &str| -> Result<f64, String> {
        let t = t.trim();
        if let Some((_, v)) = names.iter().find(|(n, _)| *n == t) {
            return Ok(*v);
        }
        t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"))
    };
    match token.split_once('*') {
        Some((a, b)) => Ok(lookup(a)? * lookup(b)?),
        None => lookup(token),
    }
}

/// Parses a sweep: a scalar, a comma list, or `start:end:count:log|lin`.
pub fn parse_sweep(spec: &str, names: &[(&str, f64)]) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(|t| parse_real(t, names)).collect(),
        [start, end, count, kind] => {
            let (a, b) = (parse_real(start, names)?, parse_real(end, names)?);
            let n: usize = count.trim().parse().map_err(|_| format!("bad point count `{count}`"))?;
            if n == 0 {
                return Err("sweep needs at least one point".into());
            }
            if !(a.is_finite() && b.is_finite()) {
                return Err("sweep endpoints must be finite".into());
            }
            let t = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let mut pts: Vec<f64> = match kind.trim() {
                "lin" => (0..n).map(|i| a + (b - a) * t(i)).collect(),
                "log" => {
                    if !(a > 0.0 && b > 0.0) {
                        return Err("log sweep needs positive endpoints".into());
                    }
                    (0..n).map(|i| a * (b / a).powf(t(i))).collect()
                }
                other => return Err(format!("sweep spacing must be `log` or `lin`, got `{other}`")),
            };
            if n > 1 {
                pts[n - 1] = b;
            }
            Ok(pts)
        }
        _ => Err(format!("expected `start:end:count:log|lin`, got `{spec}`")),
    }
}
