use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::MarketError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

/// A request with `{placeholder}` slots. Values substituted into `url` are
/// percent-encoded; values substituted into `body` are JSON-escaped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestTemplate {
    pub method: Method,
    pub url: String,
    #[serde(default)]
    pub body: Option<String>,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
}

/// Where listing fields live in a response.
///
/// Paths are `/`-separated object keys. `*` fans out over an array and
/// `key[field=value]` picks the elements of array `key` whose `field`
/// equals `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPaths {
    /// From the response root to the array of listings.
    pub items: String,
    pub publisher: String,
    pub name: String,
    pub display_name: String,
    pub install_count: String,
    pub verified: String,
    pub published_at: String,
    pub updated_at: String,
    pub versions: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointProfile {
    pub name: String,
    /// One page of listings: `{page}`, `{page_size}`, `{since}`.
    pub query: RequestTemplate,
    /// A single listing: `{publisher}`, `{name}`.
    pub lookup: RequestTemplate,
    /// Package bytes: `{publisher}`, `{name}`, `{version}`.
    pub download: RequestTemplate,
    pub fields: FieldPaths,
    /// Human-facing listing page: `{publisher}`, `{name}`.
    pub listing_url: String,
    /// Pages arrive newest-update first, so paging can stop at the first
    /// page older than `since`.
    #[serde(default)]
    pub newest_first: bool,
}

pub const PUBLIC_GALLERY: &str = "public-gallery";
pub const FIXTURE_SERVER: &str = "fixture-server";

const GALLERY_API: &str = "https://marketplace.visualstudio.com/_apis/public/gallery";

impl EndpointProfile {
    /// The public gallery's extension-query protocol.
    pub fn public_gallery() -> Self {
        let headers: BTreeMap<String, String> = [
            ("Accept", "application/json;api-version=3.0-preview.1"),
            ("Content-Type", "application/json"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let query_body = r#"{"filters":[{"criteria":[{"filterType":8,"value":"Microsoft.VisualStudio.Code"}],"pageNumber":{page},"pageSize":{page_size},"sortBy":1,"sortOrder":0}],"flags":289}"#;
        let lookup_body = r#"{"filters":[{"criteria":[{"filterType":7,"value":"{publisher}.{name}"}],"pageNumber":1,"pageSize":1}],"flags":257}"#;
        Self {
            name: PUBLIC_GALLERY.into(),
            query: RequestTemplate {
                method: Method::Post,
                url: format!("{GALLERY_API}/extensionquery"),
                body: Some(query_body.into()),
                headers: headers.clone(),
            },
            lookup: RequestTemplate {
                method: Method::Post,
                url: format!("{GALLERY_API}/extensionquery"),
                body: Some(lookup_body.into()),
                headers,
            },
            download: RequestTemplate {
                method: Method::Get,
                url: format!("{GALLERY_API}/publishers/{{publisher}}/vsextensions/{{name}}/{{version}}/vspackage"),
                body: None,
                headers: BTreeMap::new(),
            },
            fields: FieldPaths {
                items: "results/0/extensions".into(),
                publisher: "publisher/publisherName".into(),
                name: "extensionName".into(),
                display_name: "displayName".into(),
                install_count: "statistics[statisticName=install]/value".into(),
                verified: "publisher/isDomainVerified".into(),
                published_at: "publishedDate".into(),
                updated_at: "lastUpdated".into(),
                versions: "versions/*/version".into(),
            },
            listing_url: "https://marketplace.visualstudio.com/items?itemName={publisher}.{name}".into(),
            newest_first: true,
        }
    }

    /// The fixture gallery protocol rooted at `base_url`.
    pub fn fixture_server(base_url: &str) -> Self {
        let base = base_url.trim_end_matches('/');
        let get = |url: String| RequestTemplate { method: Method::Get, url, body: None, headers: BTreeMap::new() };
        Self {
            name: FIXTURE_SERVER.into(),
            query: get(format!("{base}/listings?page={{page}}&pageSize={{page_size}}&since={{since}}")),
            lookup: get(format!("{base}/extensions/{{publisher}}/{{name}}")),
            download: get(format!("{base}/download/{{publisher}}/{{name}}/{{version}}")),
            fields: FieldPaths {
                items: "items".into(),
                publisher: "publisher/publisherName".into(),
                name: "extensionName".into(),
                display_name: "displayName".into(),
                install_count: "installCount".into(),
                verified: "publisher/isVerified".into(),
                published_at: "publishedDate".into(),
                updated_at: "lastUpdated".into(),
                versions: "versions/*/version".into(),
            },
            listing_url: format!("{base}/extensions/{{publisher}}/{{name}}"),
            newest_first: false,
        }
    }

    /// A bundled profile by name, or a TOML profile file.
    pub fn resolve(spec: &str, base_url: Option<&str>) -> Result<Self, MarketError> {
        match spec {
            PUBLIC_GALLERY => Ok(Self::public_gallery()),
            FIXTURE_SERVER => base_url
                .map(Self::fixture_server)
                .ok_or_else(|| MarketError::Config("the fixture-server profile needs an endpoint URL".into())),
            path => Self::load(path),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MarketError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MarketError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| MarketError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fills `{key}` slots; unknown slots are left as they are.
pub fn render(template: &str, vars: &[(&str, &str)], escape: impl Fn(&str) -> String) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), &escape(v));
    }
    out
}

pub fn url_escape(v: &str) -> String {
    url::form_urlencoded::byte_serialize(v.as_bytes()).collect()
}

pub fn json_escape(v: &str) -> String {
    let quoted = serde_json::to_string(v).unwrap_or_default();
    quoted[1..quoted.len() - 1].to_string()
}

/// Every value reached by `path` from `root`.
pub fn select<'a>(root: &'a Value, path: &str) -> Vec<&'a Value> {
    let mut current = vec![root];
    for seg in path.split('/').filter(|s| !s.is_empty()) {
        let mut next = Vec::new();
        for v in current {
            if seg == "*" {
                next.extend(v.as_array().into_iter().flatten());
                continue;
            }
            let (key, filter) = match seg.split_once('[') {
                Some((k, rest)) => (k, rest.strip_suffix(']').and_then(|f| f.split_once('='))),
                None => (seg, None),
            };
            let child = match v {
                Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get(i)),
                _ => v.get(key),
            };
            match (child, filter) {
                (Some(c), None) => next.push(c),
                (Some(Value::Array(items)), Some((field, want))) => next.extend(items.iter().filter(|item| {
                    item.get(field).is_some_and(|f| match f {
                        Value::String(s) => s == want,
                        other => other.to_string() == want,
                    })
                })),
                _ => {}
            }
        }
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn select_paths() {
        let v = json!({"a": {"b": [{"k": "x", "v": 1}, {"k": "y", "v": 2}]}, "list": [[5, 6]]});
        assert_eq!(select(&v, "a/b/*/v"), vec![&json!(1), &json!(2)]);
        assert_eq!(select(&v, "a/b[k=y]/v"), vec![&json!(2)]);
        assert_eq!(select(&v, "list/0/1"), vec![&json!(6)]);
        assert!(select(&v, "a/missing").is_empty());
        assert_eq!(select(&v, ""), vec![&v]);
    }

    #[test]
    fn render_escapes_per_context() {
        assert_eq!(render("/x?q={q}", &[("q", "a b&c")], url_escape), "/x?q=a+b%26c");
        assert_eq!(render(r#"{"v":"{q}"}"#, &[("q", "say \"hi\"")], json_escape), r#"{"v":"say \"hi\""}"#);
        assert_eq!(render("{keep}", &[], url_escape), "{keep}");
    }

    #[test]
    fn profiles_round_trip_through_toml() {
        for p in [EndpointProfile::public_gallery(), EndpointProfile::fixture_server("http://127.0.0.1:9")] {
            let text = toml::to_string(&p).unwrap();
            assert_eq!(toml::from_str::<EndpointProfile>(&text).unwrap(), p);
        }
        assert!(EndpointProfile::resolve(FIXTURE_SERVER, None).is_err());
    }
}
