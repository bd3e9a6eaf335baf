use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("extension id `{0}` is not of the form publisher.name")]
    Malformed(String),
    #[error("extension id component `{0}` is empty or contains a path separator")]
    BadComponent(String),
}

/// Marketplace identity of an extension: `publisher.name@version`.
///
/// Publisher and name are stored lowercased; the marketplace treats ids
/// case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtensionIdentity {
    pub publisher: String,
    pub name: String,
    pub version: String,
}

impl ExtensionIdentity {
    pub fn new(publisher: &str, name: &str, version: &str) -> Result<Self, IdentityError> {
        let publisher = check_component(publisher)?;
        let name = check_component(name)?;
        Ok(Self {
            publisher,
            name,
            version: version.trim().to_string(),
        })
    }

    /// Identity used when a manifest omits publisher or name. Never fails.
    pub fn unknown() -> Self {
        Self {
            publisher: "unknown".into(),
            name: "unknown".into(),
            version: "0.0.0".into(),
        }
    }

    /// `publisher.name`, the id other extensions use to reference this one.
    pub fn canonical_id(&self) -> String {
        format!("{}.{}", self.publisher, self.name)
    }
}

impl fmt::Display for ExtensionIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}@{}", self.publisher, self.name, self.version)
    }
}

fn check_component(raw: &str) -> Result<String, IdentityError> {
    let s = raw.trim();
    if s.is_empty() || s.contains('/') || s.contains('\\') || s.chars().any(char::is_whitespace) {
        return Err(IdentityError::BadComponent(raw.to_string()));
    }
    Ok(s.to_ascii_lowercase())
}

/// Normalizes an extension reference such as `ChrisMarti.Regex` into its
/// lowercase canonical form. Rejects anything that is not `publisher.name`.
pub fn normalize_extension_id(raw: &str) -> Result<String, IdentityError> {
    let s = raw.trim();
    let (publisher, name) = s
        .split_once('.')
        .ok_or_else(|| IdentityError::Malformed(raw.to_string()))?;
    let ok = |part: &str| {
        !part.is_empty()
            && part
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    };
    if !ok(publisher) || !ok(name) || publisher.contains('.') {
        return Err(IdentityError::Malformed(raw.to_string()));
    }
    Ok(s.to_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_id_joins_with_single_dot() {
        let id = ExtensionIdentity::new("Me", "hello", "1.0.0").unwrap();
        assert_eq!(id.canonical_id(), "me.hello");
        assert_eq!(id.to_string(), "me.hello@1.0.0");
    }

    #[test]
    fn rejects_separators() {
        assert!(ExtensionIdentity::new("a/b", "x", "1").is_err());
        assert!(ExtensionIdentity::new("a", "..\\x", "1").is_err());
        assert!(ExtensionIdentity::new("", "x", "1").is_err());
    }

    #[test]
    fn normalizes_references() {
        assert_eq!(normalize_extension_id("ChrisMarti.Regex").unwrap(), "chrismarti.regex");
        assert_eq!(normalize_extension_id("ms-python.python").unwrap(), "ms-python.python");
        assert!(normalize_extension_id("nodot").is_err());
        assert!(normalize_extension_id(".x").is_err());
        assert!(normalize_extension_id("a.b c").is_err());
    }
}
