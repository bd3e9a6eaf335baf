use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::version::{numeric, parse_prerelease, PreId, Version};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("version range `{0}` is not parseable")]
pub struct RangeUnparseable(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparator {
    pub op: Op,
    pub version: Version,
}

impl Comparator {
    fn new(op: Op, version: Version) -> Self {
        Self { op, version }
    }

    pub fn matches(&self, v: &Version) -> bool {
        match self.op {
            Op::Lt => v < &self.version,
            Op::Le => v <= &self.version,
            Op::Gt => v > &self.version,
            Op::Ge => v >= &self.version,
            Op::Eq => v == &self.version,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Eq => "=",
        };
        write!(f, "{op}{}", self.version)
    }
}

/// Conjunction of comparators. An empty set matches every release.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparatorSet(pub Vec<Comparator>);

impl ComparatorSet {
    fn never() -> Self {
        Self(vec![Comparator::new(Op::Lt, Version::new(0, 0, 0).min_prerelease())])
    }

    pub fn matches(&self, v: &Version) -> bool {
        if !self.0.iter().all(|c| c.matches(v)) {
            return false;
        }
        !v.is_prerelease() || self.0.iter().any(|c| c.version.is_prerelease() && c.version.core() == v.core())
    }
}

/// An npm-style version range: comparator sets joined by `||`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionRange {
    pub text: String,
    pub sets: Vec<ComparatorSet>,
}

impl VersionRange {
    pub fn matches(&self, v: &Version) -> bool {
        self.sets.iter().any(|s| s.matches(v))
    }

    /// Whether some version satisfies both ranges.
    pub fn intersects(&self, other: &VersionRange) -> bool {
        self.sets.iter().any(|a| other.sets.iter().any(|b| sets_intersect(a, b)))
    }
}

impl fmt::Display for VersionRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for VersionRange {
    type Err = RangeUnparseable;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_range(s)
    }
}

pub fn version_in_range(v: &Version, range: &VersionRange) -> bool {
    range.matches(v)
}

/// The least satisfying version of a conjunction is one of the bounds, its
/// release core, its immediate successor, or the least prerelease of a core.
fn sets_intersect(a: &ComparatorSet, b: &ComparatorSet) -> bool {
    let zero = Version::new(0, 0, 0);
    let mut candidates = vec![zero.min_prerelease(), zero];
    for c in a.0.iter().chain(&b.0) {
        let w = &c.version;
        let succ = w.successor();
        candidates.extend([w.clone(), w.release(), w.min_prerelease(), succ.release(), succ]);
    }
    candidates.iter().any(|v| a.matches(v) && b.matches(v))
}

#[derive(Debug, Clone)]
struct Partial {
    major: Option<u64>,
    minor: Option<u64>,
    patch: Option<u64>,
    pre: Vec<PreId>,
}

impl Partial {
    fn floor(&self) -> Version {
        Version {
            major: self.major.unwrap_or(0),
            minor: self.minor.unwrap_or(0),
            patch: self.patch.unwrap_or(0),
            pre: self.pre.clone(),
        }
    }

    fn is_full(&self) -> bool {
        self.patch.is_some()
    }

    /// First release above every version the partial covers. `None` for `*`.
    fn ceiling(&self) -> Option<Version> {
        match (self.major, self.minor) {
            (None, _) => None,
            (Some(m), None) => Some(Version::new(m + 1, 0, 0)),
            (Some(m), Some(n)) => Some(Version::new(m, n + 1, 0)),
        }
    }
}

fn parse_partial(text: &str) -> Option<Partial> {
    let t = text.strip_prefix(['v', 'V']).unwrap_or(text);
    let t = t.split_once('+').map_or(t, |(v, _)| v);
    let (core, pre) = match t.split_once('-') {
        Some((c, p)) => (c, Some(parse_prerelease(p)?)),
        None => (t, None),
    };
    let parts: Vec<&str> = core.split('.').collect();
    if parts.is_empty() || parts.len() > 3 {
        return None;
    }
    let mut nums: [Option<u64>; 3] = [None; 3];
    let mut wild = false;
    for (i, p) in parts.iter().enumerate() {
        if matches!(*p, "x" | "X" | "*") {
            wild = true;
        } else if wild {
            return None;
        } else {
            nums[i] = Some(numeric(p)?);
        }
    }
    let partial = Partial { major: nums[0], minor: nums[1], patch: nums[2], pre: pre.unwrap_or_default() };
    if !partial.pre.is_empty() && !partial.is_full() {
        return None;
    }
    Some(partial)
}

fn split_op(token: &str) -> (&str, &str) {
    for op in [">=", "<=", "~>", ">", "<", "=", "~", "^"] {
        if let Some(rest) = token.strip_prefix(op) {
            return (op, rest);
        }
    }
    ("", token)
}

fn desugar(op: &str, p: &Partial, out: &mut Vec<Comparator>) -> Option<()> {
    let floor = p.floor();
    match op {
        "" | "=" => match (p.is_full(), p.ceiling()) {
            (true, _) => out.push(Comparator::new(Op::Eq, floor)),
            (false, Some(ceil)) => {
                out.push(Comparator::new(Op::Ge, floor));
                out.push(Comparator::new(Op::Lt, ceil));
            }
            (false, None) => {}
        },
        ">" => match (p.is_full(), p.ceiling()) {
            (true, _) => out.push(Comparator::new(Op::Gt, floor)),
            (false, Some(ceil)) => out.push(Comparator::new(Op::Ge, ceil)),
            (false, None) => out.extend(ComparatorSet::never().0),
        },
        ">=" => {
            if p.major.is_some() {
                out.push(Comparator::new(Op::Ge, floor));
            }
        }
        "<" => {
            if p.major.is_some() {
                out.push(Comparator::new(Op::Lt, floor));
            } else {
                out.extend(ComparatorSet::never().0);
            }
        }
        "<=" => match (p.is_full(), p.ceiling()) {
            (true, _) => out.push(Comparator::new(Op::Le, floor)),
            (false, Some(ceil)) => out.push(Comparator::new(Op::Lt, ceil)),
            (false, None) => {}
        },
        "~" | "~>" => {
            let m = p.major?;
            let ceil = match p.minor {
                Some(n) => Version::new(m, n + 1, 0),
                None => Version::new(m + 1, 0, 0),
            };
            out.push(Comparator::new(Op::Ge, floor));
            out.push(Comparator::new(Op::Lt, ceil));
        }
        "^" => {
            let m = p.major?;
            let ceil = match (m, p.minor, p.patch) {
                (0, Some(0), Some(z)) => Version::new(0, 0, z + 1),
                (0, Some(n), _) => Version::new(0, n + 1, 0),
                _ => Version::new(m + 1, 0, 0),
            };
            out.push(Comparator::new(Op::Ge, floor));
            out.push(Comparator::new(Op::Lt, ceil));
        }
        _ => return None,
    }
    Some(())
}

fn parse_set(text: &str) -> Option<ComparatorSet> {
    let mut tokens: Vec<String> = Vec::new();
    let mut pending_op: Option<String> = None;
    for raw in text.split_whitespace() {
        let (op, rest) = split_op(raw);
        match (pending_op.take(), rest.is_empty() && !op.is_empty()) {
            (Some(_), true) => return None,
            (Some(prev), false) => {
                if !op.is_empty() {
                    return None;
                }
                tokens.push(format!("{prev}{rest}"));
            }
            (None, true) => pending_op = Some(op.to_string()),
            (None, false) => tokens.push(raw.to_string()),
        }
    }
    if pending_op.is_some() {
        return None;
    }

    let mut out = Vec::new();
    if tokens.len() == 3 && tokens[1] == "-" {
        let lo = parse_partial(&tokens[0])?;
        let hi = parse_partial(&tokens[2])?;
        if lo.major.is_some() {
            out.push(Comparator::new(Op::Ge, lo.floor()));
        }
        match (hi.is_full(), hi.ceiling()) {
            (true, _) => out.push(Comparator::new(Op::Le, hi.floor())),
            (false, Some(ceil)) => out.push(Comparator::new(Op::Lt, ceil)),
            (false, None) => {}
        }
        return Some(ComparatorSet(out));
    }
    for token in &tokens {
        let (op, rest) = split_op(token);
        let partial = parse_partial(rest)?;
        desugar(op, &partial, &mut out)?;
    }
    Some(ComparatorSet(out))
}

/// Parses npm-style ranges: comparators (`<`, `<=`, `>`, `>=`, `=`), `x`/`*`
/// wildcards, partial versions, `~`, `^`, hyphen ranges, space for
/// conjunction and `||` for disjunction. An empty string means any version.
pub fn parse_range(text: &str) -> Result<VersionRange, RangeUnparseable> {
    let sets = text
        .split("||")
        .map(|s| parse_set(s.trim()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| RangeUnparseable(text.to_string()))?;
    Ok(VersionRange { text: text.trim().to_string(), sets })
}
