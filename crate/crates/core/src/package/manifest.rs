use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::identity::ExtensionIdentity;

/// Value of `capabilities.untrustedWorkspaces.supported`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UntrustedSupport {
    True,
    False,
    Limited,
    #[default]
    Absent,
}

impl UntrustedSupport {
    fn from_value(v: Option<&Value>) -> Self {
        match v {
            Some(Value::Bool(true)) => Self::True,
            Some(Value::Bool(false)) => Self::False,
            Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
                "true" => Self::True,
                "false" => Self::False,
                "limited" => Self::Limited,
                _ => Self::Absent,
            },
            _ => Self::Absent,
        }
    }
}

/// The extension's `package.json`, with the fields the analyzers use pulled
/// out and the whole document kept in `raw`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionManifest {
    pub identity: ExtensionIdentity,
    pub main: Option<String>,
    /// Package name to version range, verbatim.
    pub dependencies: BTreeMap<String, String>,
    pub extension_pack: Vec<String>,
    pub extension_dependencies: Vec<String>,
    pub untrusted_workspaces: UntrustedSupport,
    pub repository_url: Option<String>,
    pub activation_events: Vec<String>,
    /// Original manifest text.
    pub source: String,
    pub raw: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("manifest is not a JSON object: {0}")]
pub struct ManifestParseError(pub String);

impl ExtensionManifest {
    /// Parses manifest text. Missing keys become empty collections; only a
    /// document that is not a JSON object is an error.
    pub fn parse(text: &str) -> Result<Self, ManifestParseError> {
        let trimmed = text.trim_start_matches('\u{feff}');
        let value: Value =
            serde_json::from_str(trimmed).map_err(|e| ManifestParseError(e.to_string()))?;
        let Value::Object(raw) = value else {
            return Err(ManifestParseError("top-level value is not an object".into()));
        };
        Ok(Self::from_object(raw, text.to_string()))
    }

    fn from_object(raw: Map<String, Value>, source: String) -> Self {
        let str_field = |key: &str| raw.get(key).and_then(Value::as_str).map(str::to_string);

        let identity = ExtensionIdentity::new(
            str_field("publisher").as_deref().unwrap_or("unknown"),
            str_field("name").as_deref().unwrap_or("unknown"),
            str_field("version").as_deref().unwrap_or("0.0.0"),
        )
        .unwrap_or_else(|_| ExtensionIdentity::unknown());

        let dependencies = raw
            .get("dependencies")
            .and_then(Value::as_object)
            .map(|deps| {
                deps.iter()
                    .map(|(name, range)| {
                        let range = match range {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        (name.clone(), range)
                    })
                    .collect()
            })
            .unwrap_or_default();

        let repository_url = match raw.get("repository") {
            Some(Value::String(s)) => Some(s.trim().to_string()),
            Some(Value::Object(o)) => o.get("url").and_then(Value::as_str).map(|s| s.trim().to_string()),
            _ => None,
        };

        let untrusted = raw
            .get("capabilities")
            .and_then(|c| c.get("untrustedWorkspaces"))
            .and_then(|u| u.get("supported"));

        Self {
            identity,
            main: str_field("main"),
            dependencies,
            extension_pack: string_list(raw.get("extensionPack")),
            extension_dependencies: string_list(raw.get("extensionDependencies")),
            untrusted_workspaces: UntrustedSupport::from_value(untrusted),
            repository_url,
            activation_events: string_list(raw.get("activationEvents")),
            source,
            raw,
        }
    }

    /// Whether the manifest names a non-empty repository URL.
    pub fn has_repository(&self) -> bool {
        self.repository_url.as_deref().is_some_and(|u| !u.is_empty())
    }
}

fn string_list(v: Option<&Value>) -> Vec<String> {
    v.and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}
