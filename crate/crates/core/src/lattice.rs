//! Truth values in `[0, 1]` and the residuated lattice operations over them.
//!
//! Every t-norm offered here is left-continuous, so each has a unique
//! residual implication satisfying `conj(a, b) <= g` iff `a <= residuum(b, g)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A degree of truth, always within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct TruthDegree(f64);

impl TruthDegree {
    pub const ZERO: TruthDegree = TruthDegree(0.0);
    pub const ONE: TruthDegree = TruthDegree(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(TruthDegree(value))
        } else {
            Err(Error::DegreeOutOfRange(value))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            TruthDegree(0.0)
        } else {
            TruthDegree(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<TruthDegree> for f64 {
    fn from(d: TruthDegree) -> f64 {
        d.0
    }
}

impl TryFrom<f64> for TruthDegree {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        TruthDegree::new(value)
    }
}

impl fmt::Display for TruthDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Choice of t-norm (fuzzy strong conjunction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TNorm {
    Minimum,
    Product,
    #[default]
    Lukasiewicz,
}

impl TNorm {
    pub const ALL: [TNorm; 3] = [TNorm::Minimum, TNorm::Product, TNorm::Lukasiewicz];

    #[inline]
    pub fn conj(self, a: f64, b: f64) -> f64 {
        match self {
            TNorm::Minimum => a.min(b),
            TNorm::Product => a * b,
            TNorm::Lukasiewicz => (a + b - 1.0).max(0.0),
        }
    }

    /// Residual implication `I(b, g) = sup { a | conj(a, b) <= g }`.
    ///
    /// The closed form is nudged to the largest float satisfying the bound, so
    /// adjointness holds exactly under rounding, not just over the reals.
    #[inline]
    pub fn residuum(self, b: f64, g: f64) -> f64 {
        let r = match self {
            TNorm::Minimum => return if b > g { g } else { 1.0 },
            TNorm::Product => {
                if b <= g {
                    return 1.0;
                }
                g / b
            }
            TNorm::Lukasiewicz => (1.0 - b + g).min(1.0),
        };
        self.snap_residuum(r, b, g)
    }

    /// Largest float in `[0, 1]` whose conjunction with `b` stays `<= g`,
    /// searched outward from the estimate `r` over the ordered bit patterns.
    fn snap_residuum(self, r: f64, b: f64, g: f64) -> f64 {
        let ok = |bits: u64| self.conj(f64::from_bits(bits), b) <= g;
        let one = 1.0f64.to_bits();
        let start = r.clamp(0.0, 1.0).to_bits();
        // Invariant: ok(lo) and !ok(hi), with hi = one + 1 standing for "beyond 1".
        let (mut lo, mut hi) = if ok(start) {
            let (mut lo, mut step) = (start, 1u64);
            loop {
                let next = lo.saturating_add(step).min(one + 1);
                if next > one || !ok(next) {
                    break (lo, next);
                }
                lo = next;
                step *= 2;
            }
        } else {
            let (mut hi, mut step) = (start, 1u64);
            loop {
                let next = hi.saturating_sub(step);
                if ok(next) {
                    break (next, hi);
                }
                if next == 0 {
                    // conj(0, b) = 0 <= g always holds for g >= 0.
                    return 0.0;
                }
                hi = next;
                step *= 2;
            }
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        f64::from_bits(lo)
    }

    #[inline]
    pub fn neg_residuated(self, a: f64) -> f64 {
        self.residuum(a, 0.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            TNorm::Minimum => "minimum",
            TNorm::Product => "product",
            TNorm::Lukasiewicz => "lukasiewicz",
        }
    }
}

impl fmt::Display for TNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minimum" | "godel" | "goedel" => Ok(TNorm::Minimum),
            "product" | "prod" => Ok(TNorm::Product),
            "lukasiewicz" | "luk" => Ok(TNorm::Lukasiewicz),
            other => Err(Error::InvalidArgument(format!("unknown t-norm '{other}'"))),
        }
    }
}

pub fn conj(a: TruthDegree, b: TruthDegree, t: TNorm) -> TruthDegree {
    TruthDegree::saturating(t.conj(a.0, b.0))
}

pub fn residuum(b: TruthDegree, g: TruthDegree, t: TNorm) -> TruthDegree {
    TruthDegree::saturating(t.residuum(b.0, g.0))
}

/// `a -> 0` under the residuum of `t`.
pub fn neg_residuated(a: TruthDegree, t: TNorm) -> TruthDegree {
    TruthDegree::saturating(t.neg_residuated(a.0))
}

pub fn neg_involutive(a: TruthDegree) -> TruthDegree {
    TruthDegree(1.0 - a.0)
}

pub fn meet(a: TruthDegree, b: TruthDegree) -> TruthDegree {
    TruthDegree(a.0.min(b.0))
}

pub fn join(a: TruthDegree, b: TruthDegree) -> TruthDegree {
    TruthDegree(a.0.max(b.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn d(v: f64) -> TruthDegree {
        TruthDegree::new(v).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..=20).map(|i| i as f64 / 20.0).collect()
    }

    #[test]
    fn construction_rejects_out_of_range() {
        assert!(TruthDegree::new(-0.01).is_err());
        assert!(TruthDegree::new(1.01).is_err());
        assert!(TruthDegree::new(f64::NAN).is_err());
        assert_eq!(TruthDegree::new(1.0).unwrap(), TruthDegree::ONE);
    }

    #[test]
    fn conj_examples() {
        for t in TNorm::ALL {
            for x in grid() {
                assert!((conj(TruthDegree::ONE, d(x), t).value() - x).abs() < EPS);
            }
        }
        assert!((conj(d(0.7), d(0.6), TNorm::Lukasiewicz).value() - 0.3).abs() < EPS);
        assert!((conj(d(0.7), d(0.6), TNorm::Product).value() - 0.42).abs() < EPS);
    }

    #[test]
    fn residuum_examples() {
        assert_eq!(residuum(d(0.5), d(0.3), TNorm::Minimum).value(), 0.3);
        assert_eq!(residuum(d(0.3), d(0.5), TNorm::Minimum).value(), 1.0);
        assert!((residuum(d(0.5), d(0.2), TNorm::Product).value() - 0.4).abs() < EPS);
        assert_eq!(residuum(d(0.0), d(0.0), TNorm::Product).value(), 1.0);
    }

    #[test]
    fn negation_examples() {
        for t in TNorm::ALL {
            assert_eq!(neg_residuated(TruthDegree::ZERO, t).value(), 1.0);
        }
        assert!((neg_residuated(d(0.4), TNorm::Lukasiewicz).value() - 0.6).abs() < EPS);
        assert_eq!(neg_residuated(d(0.4), TNorm::Minimum).value(), 0.0);
        assert_eq!(neg_involutive(d(0.0)).value(), 1.0);
        assert_eq!(neg_involutive(d(0.5)).value(), 0.5);
        assert!((neg_involutive(d(0.3)).value() - 0.7).abs() < EPS);
    }

    #[test]
    fn lukasiewicz_negation_is_involutive() {
        for a in grid() {
            let r = neg_residuated(d(a), TNorm::Lukasiewicz).value();
            assert!((r - neg_involutive(d(a)).value()).abs() < EPS);
        }
    }

    #[test]
    fn tnorm_axioms_on_grid() {
        let g = grid();
        for t in TNorm::ALL {
            for &a in &g {
                assert!((t.conj(a, 1.0) - a).abs() < EPS, "{t} unit");
                assert_eq!(t.conj(a, 0.0), 0.0, "{t} annihilator");
                for &b in &g {
                    assert!((t.conj(a, b) - t.conj(b, a)).abs() < EPS, "{t} commutative");
                    assert!(t.conj(a, b) <= a.min(b) + EPS, "{t} below min");
                    for &c in &g {
                        let l = t.conj(t.conj(a, b), c);
                        let r = t.conj(a, t.conj(b, c));
                        assert!((l - r).abs() < EPS, "{t} associative");
                        if b <= c {
                            assert!(t.conj(a, b) <= t.conj(a, c) + EPS, "{t} monotone");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("Lukasiewicz".parse::<TNorm>().unwrap(), TNorm::Lukasiewicz);
        assert_eq!("min".parse::<TNorm>().unwrap(), TNorm::Minimum);
        assert!("hamacher".parse::<TNorm>().is_err());
        assert_eq!(TNorm::default(), TNorm::Lukasiewicz);
    }

    #[test]
    fn adjointness_on_tenth_grid() {
        let g: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        for t in TNorm::ALL {
            for &a in &g {
                for &b in &g {
                    for &c in &g {
                        assert_eq!(t.conj(a, b) <= c, a <= t.residuum(b, c), "{t} {a} {b} {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn residuum_in_subnormal_range() {
        let r = TNorm::Product.residuum(1e-300, 0.0);
        assert!(TNorm::Product.conj(r, 1e-300) == 0.0);
        assert!(TNorm::Product.conj(r.next_up(), 1e-300) > 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn tnorm() -> impl Strategy<Value = TNorm> {
            prop::sample::select(TNorm::ALL.to_vec())
        }

        proptest! {
            #[test]
            fn adjointness_holds_for_any_floats(t in tnorm(), a in 0.0f64..=1.0, b in 0.0f64..=1.0, g in 0.0f64..=1.0) {
                prop_assert_eq!(t.conj(a, b) <= g, a <= t.residuum(b, g));
            }

            #[test]
            fn residuum_is_close_to_closed_form(b in 0.0f64..=1.0, g in 0.0f64..=1.0) {
                let r = TNorm::Lukasiewicz.residuum(b, g);
                prop_assert!((r - (1.0 - b + g).min(1.0)).abs() < 1e-15);
            }
        }
    }
}
