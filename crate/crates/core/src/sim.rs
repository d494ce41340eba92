//! Multi-level polarization simulator with per-bundle kernel lookup.
//!
//! Exact virtual channels blow up with depth, so each tree node carries a
//! degraded/upgraded pair of grid channels instead. Per level every node
//! looks up the kernel assigned to its bundle, transforms both bounds,
//! re-quantizes each child pair back onto the grid and caps the atom count.
//! The reported entropy pairs bracket the exact process at every level.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::channel::{BmsChannel, MergeDirection};
use crate::error::{Error, Result};
use crate::exponents::GoodnessParams;
use crate::kernel::{polar_transform, Kernel};
use crate::quantize::{grid_size, quantize_pair, staircase_units, Pavement};

/// Leaf budget: ℓ^levels may not exceed this.
const MAX_LEAVES: f64 = 1e5;

/// Kernel assignment for the simulator: bundle key → kernel, with an
/// optional fallback.
#[derive(Debug, Clone)]
pub struct KernelTable {
    by_bundle: HashMap<String, Kernel>,
    default: Option<Kernel>,
}

impl KernelTable {
    pub fn new(by_bundle: HashMap<String, Kernel>, default: Option<Kernel>) -> Result<Self> {
        let mut ells = by_bundle.values().chain(default.iter()).map(Kernel::ell);
        let Some(first) = ells.next() else {
            return Err(Error::Domain(
                "kernel table needs at least one kernel or a default".into(),
            ));
        };
        if ells.any(|e| e != first) {
            return Err(Error::Domain("kernel table mixes kernel sizes".into()));
        }
        Ok(Self { by_bundle, default })
    }

    /// Table with only a fallback kernel.
    pub fn uniform(kernel: Kernel) -> Self {
        Self {
            by_bundle: HashMap::new(),
            default: Some(kernel),
        }
    }

    pub fn ell(&self) -> usize {
        self.by_bundle
            .values()
            .chain(self.default.iter())
            .map(Kernel::ell)
            .next()
            .expect("validated nonempty")
    }

    fn lookup(&self, key: &str) -> Result<&Kernel> {
        self.by_bundle
            .get(key)
            .or(self.default.as_ref())
            .ok_or_else(|| Error::MissingKernel(key.to_string()))
    }
}

/// One simulated tree state: bounding channels plus how many leaf indices
/// share it.
#[derive(Debug, Clone)]
pub struct TrackedChannel {
    pub d: BmsChannel,
    pub u: BmsChannel,
    pub pavement: Pavement,
    pub multiplicity: u64,
}

/// Histogram entry of one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEntry {
    pub h_d: f64,
    pub h_u: f64,
    pub multiplicity: u64,
}

/// Per-level polarization summary. `good`/`bad` classify conservatively
/// (degraded bound already clean / upgraded bound already noisy); the
/// `_optimistic` pair uses the opposite bounds, and the exact fractions of
/// the underlying process lie between the two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub leaves: u64,
    pub good: f64,
    pub bad: f64,
    pub unpolarized: f64,
    pub good_optimistic: f64,
    pub bad_optimistic: f64,
    pub entries: Vec<SimEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub ell: usize,
    pub n: usize,
    pub delta: f64,
    pub atom_cap: usize,
    pub levels: Vec<LevelReport>,
}

impl SimReport {
    /// Flat per-level CSV: level, H(D), H(U), multiplicity.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h_d,h_u,multiplicity\n");
        for level in &self.levels {
            for e in &level.entries {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    level.level, e.h_d, e.h_u, e.multiplicity
                ));
            }
        }
        out
    }
}

type StateKey = (Vec<usize>, Vec<usize>);

fn report_level(
    level: usize,
    states: &BTreeMap<StateKey, TrackedChannel>,
    delta: f64,
) -> LevelReport {
    let total: u64 = states.values().map(|s| s.multiplicity).sum();
    let mut good = 0u64;
    let mut bad = 0u64;
    let mut good_opt = 0u64;
    let mut bad_opt = 0u64;
    let mut entries = Vec::with_capacity(states.len());
    for s in states.values() {
        let h_d = s.d.entropy();
        let h_u = s.u.entropy();
        if h_d < delta {
            good += s.multiplicity;
        } else if h_u > 1.0 - delta {
            bad += s.multiplicity;
        }
        if h_u < delta {
            good_opt += s.multiplicity;
        }
        if h_d > 1.0 - delta {
            bad_opt += s.multiplicity;
        }
        entries.push(SimEntry {
            h_d,
            h_u,
            multiplicity: s.multiplicity,
        });
    }
    let frac = |c: u64| c as f64 / total as f64;
    LevelReport {
        level,
        leaves: total,
        good: frac(good),
        bad: frac(bad),
        unpolarized: frac(total - good - bad),
        good_optimistic: frac(good_opt),
        bad_optimistic: frac(bad_opt),
        entries,
    }
}

/// Runs the level-synchronous recursion for `levels` levels starting from
/// `w0`. States with identical bounding staircases aggregate, with summed
/// multiplicities; the kernel for a state is looked up under the pavement of
/// its degraded bound.
pub fn simulate(
    w0: &BmsChannel,
    levels: usize,
    table: &KernelTable,
    params: &GoodnessParams,
    delta: f64,
    atom_cap: usize,
) -> Result<SimReport> {
    if levels == 0 {
        return Err(Error::Domain("levels must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&delta) || delta <= 0.0 {
        return Err(Error::Domain(format!(
            "polarization threshold {delta} outside (0, 0.5)"
        )));
    }
    if atom_cap == 0 {
        return Err(Error::Domain("atom cap must be at least 1".into()));
    }
    let ell = table.ell();
    let n = grid_size(ell, params.mu)?;
    let leaves = (ell as f64).powi(levels as i32);
    if leaves > MAX_LEAVES {
        return Err(Error::Capacity(format!(
            "{ell}^{levels} = {leaves:.3e} leaves exceeds the budget of {MAX_LEAVES:.0e}"
        )));
    }

    let root = quantize_pair(w0, n)?;
    let mut states: BTreeMap<StateKey, TrackedChannel> = BTreeMap::new();
    states.insert(
        (staircase_units(&root.d, n), staircase_units(&root.u, n)),
        TrackedChannel {
            d: root.d,
            u: root.u,
            pavement: root.pavement,
            multiplicity: 1,
        },
    );

    let mut reports = vec![report_level(0, &states, delta)];
    for level in 1..=levels {
        let mut next: BTreeMap<StateKey, TrackedChannel> = BTreeMap::new();
        for state in states.values() {
            let kernel = table.lookup(&state.pavement.key())?;
            let children_d = polar_transform(&state.d, kernel)?;
            let children_u = polar_transform(&state.u, kernel)?;
            for (cd, cu) in children_d.into_iter().zip(children_u) {
                let d = quantize_pair(&cd, n)?
                    .d
                    .merge(MergeDirection::Degrade, atom_cap)?;
                let u = quantize_pair(&cu, n)?
                    .u
                    .merge(MergeDirection::Upgrade, atom_cap)?;
                let key = (staircase_units(&d, n), staircase_units(&u, n));
                match next.get_mut(&key) {
                    Some(existing) => existing.multiplicity += state.multiplicity,
                    None => {
                        let pavement = Pavement::from_lower_staircase(&key.0, n);
                        next.insert(
                            key,
                            TrackedChannel {
                                d,
                                u,
                                pavement,
                                multiplicity: state.multiplicity,
                            },
                        );
                    }
                }
            }
        }
        states = next;
        reports.push(report_level(level, &states, delta));
    }

    Ok(SimReport {
        ell,
        n,
        delta,
        atom_cap,
        levels: reports,
    })
}
