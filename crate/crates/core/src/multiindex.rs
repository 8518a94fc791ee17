//! Multiindex classification records.
//!
//! A profile pattern is summarized by the ordered counts of its transversal
//! crossings: signed entries count intersections with the equilibria
//! `+F*`/`-F*` (the sign tells which one), unsigned entries count zero
//! crossings between consecutive equilibrium groups.  `F0` is `{+2}`, the
//! dipole is `{-2,1,+2}`, a two-bump gluing is `{+2,2,+2}` and so on.

/// One entry of a multiindex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiIndexEntry {
    /// `count` crossings of `sign * F*` (`sign` is +1 or -1).
    Equilibrium { sign: i8, count: u32 },
    /// `count` zero crossings between the neighbouring equilibrium groups.
    Zeros { count: u32 },
}

/// Ordered crossing record, alternating equilibrium and zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndex {
    pub entries: Vec<MultiIndexEntry>,
    /// Relative amplitude below which lobes were excluded during extraction.
    pub tail_threshold: f64,
}

impl MultiIndex {
    pub fn empty(tail_threshold: f64) -> Self {
        MultiIndex {
            entries: Vec::new(),
            tail_threshold,
        }
    }

    /// Parse the compact notation, e.g. `"+2,2,+2"` or `"-2,1,+2"`.
    /// Signed tokens become equilibrium entries, unsigned ones zero entries.
    pub fn parse(s: &str, tail_threshold: f64) -> Option<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Some(Self::empty(tail_threshold));
        }
        let mut entries = Vec::new();
        for tok in s.split(',') {
            let tok = tok.trim();
            let first = tok.chars().next()?;
            match first {
                '+' | '-' => {
                    let count: u32 = tok[1..].parse().ok()?;
                    if count == 0 {
                        return None;
                    }
                    entries.push(MultiIndexEntry::Equilibrium {
                        sign: if first == '+' { 1 } else { -1 },
                        count,
                    });
                }
                _ => {
                    let count: u32 = tok.parse().ok()?;
                    if count == 0 {
                        return None;
                    }
                    entries.push(MultiIndexEntry::Zeros { count });
                }
            }
        }
        Some(MultiIndex {
            entries,
            tail_threshold,
        })
    }

    /// Compact rendering, e.g. `{+2,2,+2}` without the braces.
    pub fn notation(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|e| match e {
                MultiIndexEntry::Equilibrium { sign, count } => {
                    format!("{}{}", if *sign > 0 { "+" } else { "-" }, count)
                }
                MultiIndexEntry::Zeros { count } => format!("{count}"),
            })
            .collect();
        parts.join(",")
    }

    /// The multiindex of the negated profile: equilibrium signs flip.
    pub fn negated(&self) -> Self {
        MultiIndex {
            entries: self
                .entries
                .iter()
                .map(|e| match e {
                    MultiIndexEntry::Equilibrium { sign, count } => {
                        MultiIndexEntry::Equilibrium {
                            sign: -sign,
                            count: *count,
                        }
                    }
                    z => *z,
                })
                .collect(),
            tail_threshold: self.tail_threshold,
        }
    }

    /// Structural equality ignoring the extraction threshold.
    pub fn same_pattern(&self, other: &MultiIndex) -> bool {
        self.entries == other.entries
    }

    /// Validity: entries alternate, start and end with an equilibrium entry,
    /// and all counts are at least 1 (empty records are allowed).
    pub fn is_valid(&self) -> bool {
        if self.entries.is_empty() {
            return true;
        }
        for (i, e) in self.entries.iter().enumerate() {
            let even = i % 2 == 0;
            match e {
                MultiIndexEntry::Equilibrium { count, .. } => {
                    if !even || *count == 0 {
                        return false;
                    }
                }
                MultiIndexEntry::Zeros { count } => {
                    if even || *count == 0 {
                        return false;
                    }
                }
            }
        }
        matches!(
            self.entries.last(),
            Some(MultiIndexEntry::Equilibrium { .. })
        )
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}}", self.notation())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        for s in ["+2", "+2,2,+2", "-2,1,+2", "-8,1,+4,1,-10"] {
            let mi = MultiIndex::parse(s, 1e-4).unwrap();
            assert_eq!(mi.notation(), s);
            assert!(mi.is_valid(), "{s}");
        }
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(MultiIndex::parse("+0", 1e-4).is_none());
        assert!(MultiIndex::parse("+2,0,+2", 1e-4).is_none());
    }

    #[test]
    fn negation_flips_signs_only() {
        let mi = MultiIndex::parse("-2,3,+2", 1e-4).unwrap();
        assert_eq!(mi.negated().notation(), "+2,3,-2");
    }

    #[test]
    fn alternation_is_checked() {
        let bad = MultiIndex {
            entries: vec![
                MultiIndexEntry::Equilibrium { sign: 1, count: 2 },
                MultiIndexEntry::Equilibrium { sign: 1, count: 2 },
            ],
            tail_threshold: 1e-4,
        };
        assert!(!bad.is_valid());
        let trailing_zeros = MultiIndex {
            entries: vec![
                MultiIndexEntry::Equilibrium { sign: 1, count: 2 },
                MultiIndexEntry::Zeros { count: 1 },
            ],
            tail_threshold: 1e-4,
        };
        assert!(!trailing_zeros.is_valid());
    }
}
