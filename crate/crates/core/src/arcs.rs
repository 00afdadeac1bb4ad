use std::fmt;
use std::str::FromStr;

use crate::dynsys::Angle;
use crate::error::{Error, Result};

/// A finite union of half-open arcs [a, b) ⊂ [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet {
    arcs: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn new(mut arcs: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &arcs {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                return Err(Error::InvalidArcs(format!("arc [{a}, {b}) is not inside [0, 1]")));
            }
        }
        arcs.sort_by(|x, y| x.0.total_cmp(&y.0));
        if arcs.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::InvalidArcs("arcs overlap".into()));
        }
        Ok(ArcSet { arcs })
    }

    pub fn whole() -> Self {
        ArcSet { arcs: vec![(0.0, 1.0)] }
    }

    pub fn empty() -> Self {
        ArcSet { arcs: Vec::new() }
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn contains(&self, t: Angle) -> bool {
        let t = t.value();
        self.arcs.iter().any(|&(a, b)| a <= t && t < b)
    }

    /// Haar measure of the set.
    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(a, b)| b - a).sum()
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for &(a, b) in &self.arcs {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < 1.0 {
            out.push((cursor, 1.0));
        }
        ArcSet { arcs: out }
    }
}

/// Parses `"a,b;c,d"`.
impl FromStr for ArcSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut arcs = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (a, b) = part
                .split_once(',')
                .ok_or_else(|| Error::InvalidArcs(format!("`{part}` is not `start,end`")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArcs(format!("`{x}` is not a number")))
            };
            arcs.push((parse(a)?, parse(b)?));
        }
        ArcSet::new(arcs)
    }
}

impl fmt::Display for ArcSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.arcs.iter().map(|(a, b)| format!("{a},{b}")).collect();
        write!(f, "{}", parts.join(";"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_measure() {
        let s: ArcSet = "0,0.45;0.55,1".parse().unwrap();
        assert!((s.measure() - 0.9).abs() < 1e-15);
        assert!(s.contains(Angle::new(0.1).unwrap()));
        assert!(!s.contains(Angle::new(0.5).unwrap()));
        let c = s.complement();
        assert_eq!(c.arcs(), &[(0.45, 0.55)]);
        assert_eq!(s.to_string(), "0,0.45;0.55,1");
    }

    #[test]
    fn rejects_bad_arcs() {
        assert!("0.5,0.2".parse::<ArcSet>().is_err());
        assert!("0,0.6;0.5,1".parse::<ArcSet>().is_err());
        assert!("x,1".parse::<ArcSet>().is_err());
    }
}
