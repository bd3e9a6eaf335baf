//! Line-oriented matching for files the parser rejects.
//!
//! Only rules that can be recognized from literal text run here; rules that
//! need call shape or bindings are skipped for such files.

use std::sync::LazyLock;

use regex::Regex;

use super::rules::INSTALL_COMMAND;
use super::{excerpt, RuleSet, SourceUnit};
use crate::finding::{Finding, Location, RuleId};
use crate::identity::ExtensionIdentity;
use crate::js::LineIndex;

static TLS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"NODE_TLS_REJECT_UNAUTHORIZED['"`]?\]?\s*[:=]\s*['"`]?0\b"#).unwrap());
static INSTALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r#"['"`]{}['"`](?:\s*,\s*['"`]([^'"`]+)['"`])?"#, regex::escape(INSTALL_COMMAND))).unwrap()
});
static EXT_DIR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\.vscode[/\\]{1,2}extensions").unwrap());

/// Rules the fallback can still evaluate.
pub const FALLBACK_RULES: [RuleId; 4] =
    [RuleId::SrcTlsDisable, RuleId::SrcSilentInstall, RuleId::SrcCriticalFile, RuleId::SrcExtDirAccess];

fn column_of(line: &str, byte: usize) -> u32 {
    line[..byte].chars().count() as u32 + 1
}

struct Emitter<'a> {
    unit: &'a SourceUnit,
    rules: &'a RuleSet,
    subject: &'a ExtensionIdentity,
    lines: LineIndex<'a>,
    out: Vec<Finding>,
}

impl Emitter<'_> {
    fn emit(&mut self, rule: RuleId, line_no: u32, col: u32) -> &mut Finding {
        self.out.push(
            Finding::new(rule, self.subject, excerpt(&self.lines, line_no, col))
                .at(Location::new(&self.unit.path, line_no, col))
                .with_severity(self.rules.severity(rule))
                .with_meta("mode", "fallback"),
        );
        self.out.last_mut().unwrap()
    }
}

pub fn fallback_scan(unit: &SourceUnit, rules: &RuleSet, subject: &ExtensionIdentity) -> Vec<Finding> {
    let mut e = Emitter { unit, rules, subject, lines: LineIndex::new(&unit.text), out: Vec::new() };
    for line_no in 1..=e.lines.line_count() {
        let line = e.lines.line_text(line_no);
        if rules.enabled(RuleId::SrcTlsDisable) {
            for m in TLS.find_iter(line) {
                e.emit(RuleId::SrcTlsDisable, line_no, column_of(line, m.start()));
            }
        }
        if rules.enabled(RuleId::SrcSilentInstall) {
            for c in INSTALL.captures_iter(line) {
                let m = c.get(0).unwrap();
                let f = e.emit(RuleId::SrcSilentInstall, line_no, column_of(line, m.start()));
                if let Some(t) = c.get(1) {
                    f.metadata.insert("target".into(), t.as_str().to_string());
                }
            }
        }
        if rules.enabled(RuleId::SrcExtDirAccess) {
            for m in EXT_DIR.find_iter(line) {
                e.emit(RuleId::SrcExtDirAccess, line_no, column_of(line, m.start()));
            }
        }
        if rules.enabled(RuleId::SrcCriticalFile) {
            for frag in &rules.critical_path_watchlist {
                // Require the fragment to sit inside a quoted string.
                if let Some((start, _)) = line.match_indices(frag.as_str()).find(|(s, _)| line[..*s].contains(['\'', '"', '`'])) {
                    e.emit(RuleId::SrcCriticalFile, line_no, column_of(line, start)).metadata.insert("fragment".into(), frag.clone());
                }
            }
        }
    }
    e.out
}
