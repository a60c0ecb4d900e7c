//! TOML scenario files.

use std::path::Path;

use mavforce_core::sim::ScenarioConfig;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("config error at line {line}{}: {message}", key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse { line: usize, key: Option<String>, message: String },
    #[error("config rejected: {0}")]
    Invalid(String),
}

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Key written on the given line, if it is a `key = value` line or a
/// table header.
fn key_on_line(src: &str, line: usize) -> Option<String> {
    let text = src.lines().nth(line.checked_sub(1)?)?.trim();
    if let Some(header) = text.strip_prefix('[') {
        let name = header.trim_start_matches('[').split(']').next()?.trim();
        return (!name.is_empty()).then(|| name.to_string());
    }
    let (key, _) = text.split_once('=')?;
    let key = key.trim();
    (!key.is_empty() && !key.starts_with('#')).then(|| key.to_string())
}

/// Named key from a serde message such as "unknown field `foo`".
fn quoted_key(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

pub fn parse_config(src: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| {
        let message = e.message().trim().to_string();
        let line = e.span().map_or(1, |s| line_of(src, s.start));
        let key = if message.starts_with("unknown field") || message.starts_with("missing field") {
            quoted_key(&message)
        } else {
            None
        }
        .or_else(|| key_on_line(src, line));
        ConfigError::Parse { line, key, message }
    })?;
    cfg.validate().map_err(|e| ConfigError::Invalid(e.0))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mavforce_core::sim::ScenarioKind;

    #[test]
    fn empty_file_is_the_default_scenario() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = parse_config(
            "kind = \"leash\"\nduration = 3.0\n[admittance.gains.x]\nmass = 2.0\ndamping = 5.0\nstiffness = 1.0\n\
             [filter]\ndecay = { kind = \"exponential\", tau = 2.0 }\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ScenarioKind::Leash);
        assert_eq!(cfg.admittance.gains.x.mass, 2.0);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let err = parse_config("duration = 3.0\n\n[vehicle]\nmass = 1.5\nmas = 2.0\n").unwrap_err();
        match err {
            ConfigError::Parse { line, key, .. } => {
                assert_eq!(line, 5);
                assert_eq!(key.as_deref(), Some("mas"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_names_the_key() {
        let err = parse_config("seed = 1\nduration = \"long\"\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 2") && text.contains("duration"), "{text}");
    }

    #[test]
    fn semantic_errors_are_reported() {
        assert!(matches!(parse_config("duration = -1.0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("kind = \"coop_transport\""), Err(ConfigError::Invalid(_))));
    }
}
