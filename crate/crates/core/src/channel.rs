//! BMS channels represented as finite mixtures of binary symmetric channels.
//!
//! Every binary-input memoryless symmetric channel decomposes into a
//! probability measure over BSC crossover parameters p ∈ [0, 1/2], with the
//! parameter revealed to the receiver alongside the channel output. Here the
//! measure is finitely supported: a sorted list of `(p, mass)` atoms. The
//! erasure channel BEC(ε) is carried as the equivalent two-atom mixture
//! {(0, 1−ε), (1/2, ε)}, so one type covers all inputs of interest.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for duplicate-atom detection, mass-sum validation and
/// cdf comparisons. Values this close are treated as identical everywhere.
pub const ATOM_TOL: f64 = 1e-12;

/// One point of the crossover measure: BSC(`p`) carrying probability `mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub p: f64,
    pub mass: f64,
}

/// Binary entropy h2(p) = −p·log2(p) − (1−p)·log2(1−p), with 0·log2(0) = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Domain(format!(
            "crossover probability {p} outside [0, 1/2]"
        )));
    }
    Ok(h2(p))
}

/// Inverse of [`binary_entropy`] on [0, 1/2].
pub fn inverse_binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("entropy value {x} outside [0, 1]")));
    }
    Ok(h2_inv(x))
}

pub(crate) fn h2(p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 0.5 {
        return 1.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Bisection until the bracket can no longer shrink, so the result is exact
/// to the last bit rather than to some looser cutoff. h2 is strictly
/// increasing on [0, 1/2].
pub(crate) fn h2_inv(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if h2(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Which way [`BmsChannel::merge`] is allowed to move probability mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeDirection {
    /// Mass moves to the noisier atom; the result is degraded.
    Degrade,
    /// Mass moves to the cleaner atom; the result is upgraded.
    Upgrade,
}

/// A BMS channel in canonical form: atoms sorted by `p`, no two closer than
/// [`ATOM_TOL`], masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmsChannel {
    atoms: Vec<Atom>,
}

impl BmsChannel {
    /// Validates and canonicalizes a list of atoms.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Channel("channel needs at least one atom".into()));
        }
        for a in &atoms {
            if !a.p.is_finite() || !(-ATOM_TOL..=0.5 + ATOM_TOL).contains(&a.p) {
                return Err(Error::Channel(format!(
                    "crossover probability {} outside [0, 1/2]",
                    a.p
                )));
            }
            if !a.mass.is_finite() || a.mass <= 0.0 {
                return Err(Error::Channel(format!(
                    "atom mass {} must be positive",
                    a.mass
                )));
            }
        }
        let ch = Self::canonicalize(atoms);
        let total: f64 = ch.atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > ATOM_TOL {
            return Err(Error::Channel(format!(
                "atom masses sum to {total}, expected 1"
            )));
        }
        Ok(ch)
    }

    /// Sorts, drops zero-mass atoms and fuses near-duplicate positions at
    /// their mass-weighted mean. Exact duplicates fuse exactly, so entropy
    /// and the cdf are preserved.
    pub(crate) fn canonicalize(mut atoms: Vec<Atom>) -> Self {
        atoms.retain(|a| a.mass > 0.0);
        assert!(!atoms.is_empty(), "channel lost all probability mass");
        for a in &mut atoms {
            a.p = a.p.clamp(0.0, 0.5);
        }
        atoms.sort_by(|a, b| a.p.total_cmp(&b.p));
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match out.last_mut() {
                Some(last) if a.p - last.p < ATOM_TOL => {
                    let mass = last.mass + a.mass;
                    last.p = (last.p * last.mass + a.p * a.mass) / mass;
                    last.mass = mass;
                }
                _ => out.push(a),
            }
        }
        Self { atoms: out }
    }

    /// BSC(p) as a single-atom mixture.
    pub fn bsc(p: f64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=0.5).contains(&p) {
            return Err(Error::Channel(format!(
                "crossover probability {p} outside [0, 1/2]"
            )));
        }
        Ok(Self {
            atoms: vec![Atom { p, mass: 1.0 }],
        })
    }

    /// BEC(ε) as the equivalent mixture {(0, 1−ε), (1/2, ε)}.
    pub fn bec(eps: f64) -> Result<Self> {
        if !eps.is_finite() || !(0.0..=1.0).contains(&eps) {
            return Err(Error::Channel(format!(
                "erasure probability {eps} outside [0, 1]"
            )));
        }
        if eps <= 0.0 {
            return Ok(Self::noiseless());
        }
        if eps >= 1.0 {
            return Ok(Self::full_noise());
        }
        Ok(Self {
            atoms: vec![
                Atom {
                    p: 0.0,
                    mass: 1.0 - eps,
                },
                Atom { p: 0.5, mass: eps },
            ],
        })
    }

    /// The perfect channel: a single atom at p = 0.
    pub fn noiseless() -> Self {
        Self {
            atoms: vec![Atom { p: 0.0, mass: 1.0 }],
        }
    }

    /// The useless channel BSC(1/2).
    pub fn full_noise() -> Self {
        Self {
            atoms: vec![Atom { p: 0.5, mass: 1.0 }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Conditional entropy H(W) = Σ mass·h2(p), in bits.
    pub fn entropy(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass * h2(a.p)).sum()
    }

    /// Capacity I(W) = 1 − H(W).
    pub fn capacity(&self) -> f64 {
        1.0 - self.entropy()
    }

    /// Cumulative mass of atoms with h2(p) ≤ x, the cdf of the crossover
    /// measure in the x = h2(p) parametrization (right-continuous in x).
    pub fn cdf(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for a in &self.atoms {
            if h2(a.p) <= x + ATOM_TOL {
                total += a.mass;
            } else {
                break;
            }
        }
        total
    }

    /// Cumulative mass strictly below x: atoms within [`ATOM_TOL`] of x count
    /// as sitting at x and are excluded.
    pub(crate) fn cdf_below(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for a in &self.atoms {
            if h2(a.p) < x - ATOM_TOL {
                total += a.mass;
            } else {
                break;
            }
        }
        total
    }

    /// True when `self` is an upgrade of `other` in the cdf sense: the cdf of
    /// `self` stays above the cdf of `other` everywhere. This is a sufficient
    /// condition for true degradation, not an equivalent one.
    pub fn dominates(&self, other: &Self) -> bool {
        // Both cdfs are step functions jumping only at their own atoms, so it
        // is enough to compare right after each jump point of either side.
        let (mut iu, mut id) = (0usize, 0usize);
        let (mut cu, mut cd) = (0.0f64, 0.0f64);
        while iu < self.atoms.len() || id < other.atoms.len() {
            let xu = self.atoms.get(iu).map(|a| h2(a.p));
            let xd = other.atoms.get(id).map(|a| h2(a.p));
            let x = match (xu, xd) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => break,
            };
            while iu < self.atoms.len() && h2(self.atoms[iu].p) <= x + ATOM_TOL {
                cu += self.atoms[iu].mass;
                iu += 1;
            }
            while id < other.atoms.len() && h2(other.atoms[id].p) <= x + ATOM_TOL {
                cd += other.atoms[id].mass;
                id += 1;
            }
            if cu < cd - ATOM_TOL {
                return false;
            }
        }
        true
    }

    /// Reduces the mixture to at most `max_atoms` atoms by repeatedly fusing
    /// the adjacent pair whose fusion changes the entropy least. Degrading
    /// moves the pair's mass to the noisier position, upgrading to the
    /// cleaner one, so the result stays on the stated side of `self`.
    pub fn merge(&self, direction: MergeDirection, max_atoms: usize) -> Result<Self> {
        if max_atoms == 0 {
            return Err(Error::Domain("max atom count must be at least 1".into()));
        }
        if self.atoms.len() <= max_atoms {
            return Ok(self.clone());
        }
        let mut atoms = self.atoms.clone();
        while atoms.len() > max_atoms {
            let mut best = (f64::INFINITY, 0usize);
            for i in 0..atoms.len() - 1 {
                let dh = h2(atoms[i + 1].p) - h2(atoms[i].p);
                let cost = match direction {
                    MergeDirection::Degrade => atoms[i].mass * dh,
                    MergeDirection::Upgrade => atoms[i + 1].mass * dh,
                };
                if cost < best.0 {
                    best = (cost, i);
                }
            }
            let i = best.1;
            let mass = atoms[i].mass + atoms[i + 1].mass;
            let p = match direction {
                MergeDirection::Degrade => atoms[i + 1].p,
                MergeDirection::Upgrade => atoms[i].p,
            };
            atoms.splice(i..=i + 1, [Atom { p, mass }]);
        }
        Ok(Self { atoms })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChannelSpec {
    Atoms { atoms: Vec<Atom> },
    Bsc { bsc: f64 },
    Bec { bec: f64 },
}

impl<'de> Deserialize<'de> for BmsChannel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = ChannelSpec::deserialize(deserializer)?;
        let built = match spec {
            ChannelSpec::Atoms { atoms } => BmsChannel::new(atoms),
            ChannelSpec::Bsc { bsc } => BmsChannel::bsc(bsc),
            ChannelSpec::Bec { bec } => BmsChannel::bec(bec),
        };
        built.map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(atoms: &[(f64, f64)]) -> BmsChannel {
        BmsChannel::new(atoms.iter().map(|&(p, mass)| Atom { p, mass }).collect()).unwrap()
    }

    #[test]
    fn entropy_endpoints() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!((binary_entropy(0.11).unwrap() - 0.49992).abs() < 1e-4);
        assert!(binary_entropy(0.7).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        for p in [0.05, 0.2, 0.4] {
            let x = binary_entropy(p).unwrap();
            assert!((inverse_binary_entropy(x).unwrap() - p).abs() <= 1e-10);
        }
        assert_eq!(inverse_binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(inverse_binary_entropy(1.0).unwrap(), 0.5);
        assert!(inverse_binary_entropy(1.5).is_err());
    }

    #[test]
    fn channel_entropy_cases() {
        assert!((BmsChannel::bsc(0.3).unwrap().entropy() - h2(0.3)).abs() < 1e-15);
        assert!((BmsChannel::bec(0.5).unwrap().entropy() - 0.5).abs() < 1e-15);
        let w = channel(&[(0.11, 0.3), (0.25, 0.7)]);
        let expected = 0.3 * h2(0.11) + 0.7 * h2(0.25);
        assert!((w.entropy() - expected).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        assert!(BmsChannel::new(vec![]).is_err());
        assert!(BmsChannel::new(vec![Atom { p: 0.7, mass: 1.0 }]).is_err());
        assert!(BmsChannel::new(vec![Atom { p: 0.1, mass: 0.0 }]).is_err());
        assert!(BmsChannel::new(vec![Atom { p: 0.1, mass: 0.5 }]).is_err());
    }

    #[test]
    fn duplicate_atoms_fuse() {
        let w = channel(&[(0.2, 0.25), (0.2, 0.25), (0.3, 0.5)]);
        assert_eq!(w.atoms().len(), 2);
        assert!((w.atoms()[0].mass - 0.5).abs() < 1e-15);
        let expected = 0.5 * h2(0.2) + 0.5 * h2(0.3);
        assert!((w.entropy() - expected).abs() <= 1e-12);

        // Fusing preserves the cdf everywhere, not just the entropy.
        let loose = [(0.2, 0.25), (0.2, 0.25), (0.3, 0.5)];
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            let direct: f64 = loose
                .iter()
                .filter(|&&(p, _)| h2(p) <= x + ATOM_TOL)
                .map(|&(_, m)| m)
                .sum();
            assert!((w.cdf(x) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn cdf_steps() {
        let p0 = h2_inv(0.3);
        let w = BmsChannel::bsc(p0).unwrap();
        assert_eq!(w.cdf(0.29), 0.0);
        assert_eq!(w.cdf(0.3), 1.0);
        assert_eq!(w.cdf(1.0), 1.0);

        // For the BEC(0.5) mixture the atoms sit at x = 0 and x = h2(1/2) = 1.
        let bec = BmsChannel::bec(0.5).unwrap();
        assert!((bec.cdf(0.49) - 0.5).abs() < 1e-15);
        assert!((bec.cdf(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(bec.cdf(1.0), 1.0);
    }

    #[test]
    fn dominance() {
        let w = channel(&[(0.1, 0.4), (0.3, 0.6)]);
        assert!(w.dominates(&w));
        let a = BmsChannel::bsc(0.1).unwrap();
        let b = BmsChannel::bsc(0.2).unwrap();
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
        assert!(BmsChannel::noiseless().dominates(&BmsChannel::full_noise()));
        assert!(!BmsChannel::full_noise().dominates(&BmsChannel::noiseless()));
    }

    #[test]
    fn merge_examples() {
        let w = channel(&[(0.1, 0.5), (0.12, 0.5)]);
        assert_eq!(w.merge(MergeDirection::Degrade, 2).unwrap(), w);

        let d = w.merge(MergeDirection::Degrade, 1).unwrap();
        assert_eq!(d.atoms().len(), 1);
        assert!((d.atoms()[0].p - 0.12).abs() < 1e-15);
        assert!((d.atoms()[0].mass - 1.0).abs() < 1e-15);
        assert!(d.entropy() >= w.entropy());
        assert!(w.dominates(&d));

        let u = w.merge(MergeDirection::Upgrade, 1).unwrap();
        assert!((u.atoms()[0].p - 0.1).abs() < 1e-15);
        assert!(u.entropy() <= w.entropy());
        assert!(u.dominates(&w));

        assert!(w.merge(MergeDirection::Degrade, 0).is_err());
    }

    #[test]
    fn entropy_monotone_under_dominance() {
        let w = channel(&[(0.05, 0.2), (0.2, 0.3), (0.4, 0.5)]);
        let d = w.merge(MergeDirection::Degrade, 2).unwrap();
        let u = w.merge(MergeDirection::Upgrade, 2).unwrap();
        assert!(u.dominates(&w) && w.dominates(&d));
        assert!(u.entropy() <= w.entropy() && w.entropy() <= d.entropy());
    }

    #[test]
    fn json_forms() {
        let w: BmsChannel = serde_json::from_str(r#"{"bsc": 0.11}"#).unwrap();
        assert_eq!(w, BmsChannel::bsc(0.11).unwrap());
        let w: BmsChannel = serde_json::from_str(r#"{"bec": 0.5}"#).unwrap();
        assert_eq!(w, BmsChannel::bec(0.5).unwrap());
        let w: BmsChannel = serde_json::from_str(
            r#"{"atoms": [{"p": 0.1, "mass": 0.25}, {"p": 0.3, "mass": 0.75}]}"#,
        )
        .unwrap();
        assert_eq!(w.atoms().len(), 2);
        let text = serde_json::to_string(&w).unwrap();
        let back: BmsChannel = serde_json::from_str(&text).unwrap();
        assert_eq!(w, back);
        assert!(serde_json::from_str::<BmsChannel>(r#"{"bsc": 0.9}"#).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_channel() -> impl Strategy<Value = BmsChannel> {
            proptest::collection::vec((0.0f64..=0.5, 0.05f64..1.0), 1..7).prop_map(|pairs| {
                let total: f64 = pairs.iter().map(|(_, m)| m).sum();
                BmsChannel::new(
                    pairs
                        .into_iter()
                        .map(|(p, m)| Atom { p, mass: m / total })
                        .collect(),
                )
                .unwrap()
            })
        }

        proptest! {
            #[test]
            fn cdf_monotone_and_complete(w in arb_channel()) {
                let mut prev = 0.0;
                for k in 0..=50 {
                    let x = k as f64 / 50.0;
                    let c = w.cdf(x);
                    prop_assert!(c >= prev - 1e-15);
                    prev = c;
                }
                prop_assert!((w.cdf(1.0) - 1.0).abs() <= 1e-9);
            }

            #[test]
            fn merge_brackets_the_channel(w in arb_channel(), cap in 1usize..4) {
                let d = w.merge(MergeDirection::Degrade, cap).unwrap();
                let u = w.merge(MergeDirection::Upgrade, cap).unwrap();
                prop_assert!(d.atoms().len() <= cap && u.atoms().len() <= cap);
                prop_assert!(w.dominates(&d));
                prop_assert!(u.dominates(&w));
                prop_assert!(d.entropy() >= w.entropy() - 1e-12);
                prop_assert!(u.entropy() <= w.entropy() + 1e-12);
                let dm: f64 = d.atoms().iter().map(|a| a.mass).sum();
                let um: f64 = u.atoms().iter().map(|a| a.mass).sum();
                prop_assert!((dm - 1.0).abs() <= 1e-9 && (um - 1.0).abs() <= 1e-9);
            }
        }
    }
}
