//! Random npm-style ranges over a small version lattice, each paired with a
//! predicate evaluated directly on `(major, minor, patch)` tuples by prefix
//! comparison. Shares no code with the scanner's range parser.

use std::cmp::Ordering;

use rand::Rng;

pub type Triple = (u64, u64, u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Bare,
    Tilde,
    Caret,
    Star,
    Hyphen,
}

#[derive(Debug, Clone)]
pub struct Term {
    pub form: Form,
    /// 1 to 3 leading components; the rest are wildcards.
    pub parts: Vec<u64>,
    /// Upper end of a hyphen range.
    pub upper: Vec<u64>,
    /// Spell missing components as `.x` instead of omitting them.
    pub spell_x: bool,
}

fn prefix_cmp(v: Triple, parts: &[u64]) -> Ordering {
    let v = [v.0, v.1, v.2];
    v[..parts.len()].cmp(parts)
}

impl Term {
    pub fn admits(&self, v: Triple) -> bool {
        let c = prefix_cmp(v, &self.parts);
        match self.form {
            Form::Lt => c == Ordering::Less,
            Form::Le => c != Ordering::Greater,
            Form::Gt => c == Ordering::Greater,
            Form::Ge => c != Ordering::Less,
            Form::Eq | Form::Bare => c == Ordering::Equal,
            Form::Star => true,
            Form::Hyphen => c != Ordering::Less && prefix_cmp(v, &self.upper) != Ordering::Greater,
            Form::Tilde => {
                let fixed = if self.parts.len() == 1 { 1 } else { 2 };
                c != Ordering::Less && prefix_cmp(v, &self.parts[..fixed]) == Ordering::Equal
            }
            Form::Caret => {
                // Components up to and including the first non-zero one are fixed.
                let first_nonzero = self.parts.iter().position(|&p| p != 0);
                let fixed = first_nonzero.map_or(self.parts.len(), |i| i + 1);
                c != Ordering::Less && prefix_cmp(v, &self.parts[..fixed]) == Ordering::Equal
            }
        }
    }

    fn spell(parts: &[u64], x: bool) -> String {
        let mut s: Vec<String> = parts.iter().map(u64::to_string).collect();
        if x {
            while s.len() < 3 {
                s.push("x".into());
            }
        }
        s.join(".")
    }

    pub fn text(&self) -> String {
        let v = Self::spell(&self.parts, self.spell_x);
        match self.form {
            Form::Lt => format!("<{v}"),
            Form::Le => format!("<={v}"),
            Form::Gt => format!(">{v}"),
            Form::Ge => format!(">={v}"),
            Form::Eq => format!("={v}"),
            Form::Bare => v,
            Form::Tilde => format!("~{v}"),
            Form::Caret => format!("^{v}"),
            Form::Star => "*".into(),
            Form::Hyphen => format!("{v} - {}", Self::spell(&self.upper, self.spell_x)),
        }
    }
}

/// Disjunction of conjunctions of terms.
#[derive(Debug, Clone)]
pub struct OracleRange {
    pub sets: Vec<Vec<Term>>,
}

impl OracleRange {
    pub fn admits(&self, v: Triple) -> bool {
        self.sets.iter().any(|set| set.iter().all(|t| t.admits(v)))
    }

    pub fn text(&self) -> String {
        self.sets
            .iter()
            .map(|set| set.iter().map(Term::text).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join(" || ")
    }
}

/// Every release version with major 0..=`max_major` and minor/patch 0..=`max_minor`.
pub fn lattice(max_major: u64, max_minor: u64) -> Vec<Triple> {
    let mut out = Vec::new();
    for a in 0..=max_major {
        for b in 0..=max_minor {
            for c in 0..=max_minor {
                out.push((a, b, c));
            }
        }
    }
    out
}

fn random_parts<R: Rng>(rng: &mut R) -> Vec<u64> {
    let len = rng.gen_range(1..=3);
    let mut p = vec![rng.gen_range(0..=3)];
    for _ in 1..len {
        p.push(rng.gen_range(0..=9));
    }
    p
}

pub fn random_term<R: Rng>(rng: &mut R) -> Term {
    const FORMS: [Form; 10] = [
        Form::Lt,
        Form::Le,
        Form::Gt,
        Form::Ge,
        Form::Eq,
        Form::Bare,
        Form::Tilde,
        Form::Caret,
        Form::Star,
        Form::Hyphen,
    ];
    let form = FORMS[rng.gen_range(0..FORMS.len())];
    let parts = random_parts(rng);
    let upper = if form == Form::Hyphen { random_parts(rng) } else { Vec::new() };
    Term { form, parts, upper, spell_x: rng.gen_bool(0.3) }
}

pub fn random_range<R: Rng>(rng: &mut R) -> OracleRange {
    let sets = (0..rng.gen_range(1..=2))
        .map(|_| {
            let n = rng.gen_range(1..=2);
            let mut set: Vec<Term> = (0..n).map(|_| random_term(rng)).collect();
            // A hyphen range must stand alone in its set.
            if set.iter().any(|t| t.form == Form::Hyphen) && set.len() > 1 {
                set.retain(|t| t.form != Form::Hyphen);
                if set.is_empty() {
                    set.push(random_term(rng));
                }
            }
            set
        })
        .collect();
    OracleRange { sets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(form: Form, parts: &[u64]) -> Term {
        Term { form, parts: parts.to_vec(), upper: Vec::new(), spell_x: false }
    }

    #[test]
    fn prefix_semantics() {
        assert!(term(Form::Bare, &[0, 10]).admits((0, 10, 5)));
        assert!(!term(Form::Bare, &[0, 10]).admits((0, 11, 0)));
        assert!(term(Form::Lt, &[0, 21, 1]).admits((0, 21, 0)));
        assert!(term(Form::Gt, &[1, 2]).admits((1, 3, 0)) && !term(Form::Gt, &[1, 2]).admits((1, 2, 9)));
        assert!(term(Form::Caret, &[0, 2, 3]).admits((0, 2, 9)) && !term(Form::Caret, &[0, 2, 3]).admits((0, 3, 0)));
        assert!(term(Form::Caret, &[0, 0, 3]).admits((0, 0, 3)) && !term(Form::Caret, &[0, 0, 3]).admits((0, 0, 4)));
        assert!(term(Form::Caret, &[0, 0]).admits((0, 0, 7)) && !term(Form::Caret, &[0, 0]).admits((0, 1, 0)));
        assert!(term(Form::Caret, &[0]).admits((0, 9, 0)) && !term(Form::Caret, &[0]).admits((1, 0, 0)));
        assert!(term(Form::Tilde, &[1]).admits((1, 9, 9)) && !term(Form::Tilde, &[1, 2, 3]).admits((1, 3, 0)));
    }
}
