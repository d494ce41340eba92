//! Tile-grid quantization of channels and enumeration of pavements.
//!
//! The unit square is cut into n×n tiles in the coordinates (x, cdf) with
//! x = h2(p). A channel's cdf is rounded down to the lattice to get a
//! degraded bound and rounded up to get an upgraded bound; the monotone run
//! of tiles it crosses is its pavement, and the two boundary staircases of a
//! pavement bound every channel whose cdf stays inside it.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{h2_inv, Atom, BmsChannel};
use crate::error::{Error, Result};

/// Slack when rounding `n · cdf` to integer tile units; absorbs float noise
/// in masses that are exact multiples of 1/n.
const UNIT_TOL: f64 = 1e-9;

/// Largest grid side for exhaustive pavement enumeration.
const MAX_ENUM_N: usize = 14;

/// Largest grid side when vertex-connected tile runs are included.
const MAX_ENUM_N_VERTEX: usize = 10;

/// Smallest integer n with n^mu strictly greater than ell, i.e. the number
/// of tiles per side when the tile size is ell^(-1/mu).
pub fn grid_size(ell: usize, mu: f64) -> Result<usize> {
    if ell < 2 {
        return Err(Error::Domain(format!(
            "kernel size {ell} must be at least 2"
        )));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::Domain(format!(
            "scaling exponent {mu} must be positive and finite"
        )));
    }
    let target = (ell as f64).ln() / mu; // ln of ell^(1/mu)
    let approx = target.exp();
    if approx >= 1e9 {
        return Err(Error::Capacity(format!(
            "grid would need about {approx:.3e} tiles per side"
        )));
    }
    let mut n = (approx.floor() as usize).saturating_sub(1).max(1);
    while (n as f64).ln() <= target + 1e-9 {
        n += 1;
    }
    Ok(n)
}

/// A quantization grid: kernel size, targeted scaling exponent and the
/// derived tile count per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub ell: usize,
    pub mu: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(ell: usize, mu: f64) -> Result<Self> {
        Ok(Self {
            ell,
            mu,
            n: grid_size(ell, mu)?,
        })
    }
}

/// One move in a tile run. `Diag` only appears in vertex-connected
/// enumeration, where two consecutive tiles may share just a corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Diag,
    Right,
    Up,
}

impl Step {
    fn ch(self) -> char {
        match self {
            Step::Diag => 'D',
            Step::Right => 'R',
            Step::Up => 'U',
        }
    }
}

/// A monotone run of edge-to-edge tiles from tile (0,0) to tile (n−1,n−1):
/// n−1 right steps and n−1 up steps, 2n−1 tiles in total. Serialized as a
/// string over {R, U} (plus D for vertex-connected runs).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pavement {
    n: usize,
    steps: Vec<Step>,
}

impl Pavement {
    pub fn new(n: usize, steps: Vec<Step>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("grid side {n} must be at least 2")));
        }
        let (mut col, mut row) = (0usize, 0usize);
        for s in &steps {
            match s {
                Step::Right => col += 1,
                Step::Up => row += 1,
                Step::Diag => {
                    col += 1;
                    row += 1;
                }
            }
            if col >= n || row >= n {
                return Err(Error::Domain(format!(
                    "pavement walks outside the {n}x{n} grid"
                )));
            }
        }
        if col != n - 1 || row != n - 1 {
            return Err(Error::Domain(format!(
                "pavement ends at tile ({col}, {row}), expected ({}, {})",
                n - 1,
                n - 1
            )));
        }
        Ok(Self { n, steps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// The step string, used as the canonical bundle key.
    pub fn key(&self) -> String {
        self.to_string()
    }

    /// Lowest and highest occupied tile row per column.
    pub fn column_spans(&self) -> Vec<(usize, usize)> {
        let mut spans = vec![(usize::MAX, 0usize); self.n];
        let (mut col, mut row) = (0usize, 0usize);
        let visit = |c: usize, r: usize, spans: &mut Vec<(usize, usize)>| {
            spans[c].0 = spans[c].0.min(r);
            spans[c].1 = spans[c].1.max(r);
        };
        visit(col, row, &mut spans);
        for s in &self.steps {
            match s {
                Step::Right => col += 1,
                Step::Up => row += 1,
                Step::Diag => {
                    col += 1;
                    row += 1;
                }
            }
            visit(col, row, &mut spans);
        }
        spans
    }

    /// Number of tiles in the run: 2n−1 minus one per diagonal step.
    pub fn tile_count(&self) -> usize {
        1 + self.steps.len()
    }

    /// Canonical pavement for a degraded staircase: `units[k]` is the
    /// staircase height in 1/n units at x = k/n. The run enters each column
    /// at the previous exit row and leaves it where the staircase crosses the
    /// next column boundary, clamped into the grid, so extreme channels whose
    /// cdf hugs the top or bottom edge still get a well-defined run.
    pub(crate) fn from_lower_staircase(units: &[usize], n: usize) -> Self {
        debug_assert_eq!(units.len(), n + 1);
        let mut steps = Vec::with_capacity(2 * (n - 1));
        let mut row = 0usize;
        for c in 0..n - 1 {
            let exit = units[c + 1].min(n - 1).max(row);
            for _ in row..exit {
                steps.push(Step::Up);
            }
            steps.push(Step::Right);
            row = exit;
        }
        for _ in row..n - 1 {
            steps.push(Step::Up);
        }
        Self { n, steps }
    }
}

impl fmt::Display for Pavement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            write!(f, "{}", s.ch())?;
        }
        Ok(())
    }
}

impl FromStr for Pavement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut steps = Vec::with_capacity(s.len());
        let (mut r, mut u, mut d) = (0usize, 0usize, 0usize);
        for c in s.chars() {
            steps.push(match c {
                'R' => {
                    r += 1;
                    Step::Right
                }
                'U' => {
                    u += 1;
                    Step::Up
                }
                'D' => {
                    d += 1;
                    Step::Diag
                }
                other => {
                    return Err(Error::Domain(format!(
                        "invalid pavement step {other:?}, expected R, U or D"
                    )))
                }
            });
        }
        if r + d != u + d {
            return Err(Error::Domain(format!(
                "pavement {s:?} does not end on the grid diagonal"
            )));
        }
        Pavement::new(r + d + 1, steps)
    }
}

impl Serialize for Pavement {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Pavement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A pavement together with its boundary channels: `d` traces the lower-right
/// boundary of the tile run, `u` the upper-left one, and every channel whose
/// cdf stays inside the run is sandwiched between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub pavement: Pavement,
    pub d: BmsChannel,
    pub u: BmsChannel,
}

impl Bundle {
    /// A width-zero bundle pinning a single channel; useful for testing a
    /// kernel against one channel rather than a whole tile run.
    pub fn degenerate(w: &BmsChannel, n: usize) -> Result<Self> {
        let pair = quantize_pair(w, n)?;
        Ok(Self {
            pavement: pair.pavement,
            d: w.clone(),
            u: w.clone(),
        })
    }

    /// Entropy width H(D) − H(U) of the bundle.
    pub fn gap(&self) -> f64 {
        self.d.entropy() - self.u.entropy()
    }
}

/// Cached grid levels h2^{-1}(k/n) for k = 0..=n.
pub(crate) fn grid_levels(n: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Arc::new((0..=n).map(|k| h2_inv(k as f64 / n as f64)).collect()))
        .clone()
}

/// Builds a grid channel from cumulative tile units: `units[k]` is n times
/// the cdf at x = k/n, so the atom at h2^{-1}(k/n) gets the k-th increment.
pub(crate) fn staircase_channel(units: &[usize], n: usize) -> BmsChannel {
    let levels = grid_levels(n);
    let mut atoms = Vec::new();
    let mut prev = 0usize;
    for (k, &u) in units.iter().enumerate() {
        if u > prev {
            atoms.push(Atom {
                p: levels[k],
                mass: (u - prev) as f64 / n as f64,
            });
        }
        prev = u;
    }
    BmsChannel::canonicalize(atoms)
}

/// Floor-rounded cumulative tile units of a channel's cdf at the lattice
/// points; exactly inverts [`staircase_channel`] for grid-aligned channels.
pub(crate) fn staircase_units(w: &BmsChannel, n: usize) -> Vec<usize> {
    (0..=n)
        .map(|k| {
            let y = n as f64 * w.cdf(k as f64 / n as f64);
            ((y + UNIT_TOL).floor() as usize).min(n)
        })
        .collect()
}

/// The two bounding channels of a channel on the n-grid, plus the pavement
/// its cdf crosses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizedPair {
    pub d: BmsChannel,
    pub u: BmsChannel,
    pub pavement: Pavement,
}

/// Quantizes a channel to the n-grid.
///
/// The degraded side rounds the cdf down at every lattice point; the
/// upgraded side rounds the sup of the cdf over each column up, which pulls
/// each atom to the left edge of its tile while leaving mass already sitting
/// exactly on a lattice point in place. Guarantees `u` ⪰ `w` ⪰ `d` in the
/// cdf-dominance sense, with H(d) − H(u) < 2/n.
pub fn quantize_pair(w: &BmsChannel, n: usize) -> Result<QuantizedPair> {
    if n < 2 {
        return Err(Error::Domain(format!("grid side {n} must be at least 2")));
    }
    let d_units = staircase_units(w, n);
    let u_units: Vec<usize> = (0..=n)
        .map(|k| {
            if k == n {
                n
            } else {
                let y = n as f64 * w.cdf_below((k + 1) as f64 / n as f64);
                ((y - UNIT_TOL).ceil().max(0.0) as usize).min(n)
            }
        })
        .collect();
    let pavement = Pavement::from_lower_staircase(&d_units, n);
    Ok(QuantizedPair {
        d: staircase_channel(&d_units, n),
        u: staircase_channel(&u_units, n),
        pavement,
    })
}

/// Boundary channels of a pavement. The lower-right boundary runs along the
/// bottom of each column and rises to one at x = 1; the upper-left boundary
/// runs along the top of each column starting at x = 0.
pub fn bundle_endpoints(pavement: &Pavement) -> Bundle {
    let n = pavement.n;
    let spans = pavement.column_spans();
    let mut d_units = Vec::with_capacity(n + 1);
    let mut u_units = Vec::with_capacity(n + 1);
    for (lo, hi) in &spans {
        d_units.push(*lo);
        u_units.push(hi + 1);
    }
    d_units.push(n);
    u_units.push(n);
    Bundle {
        pavement: pavement.clone(),
        d: staircase_channel(&d_units, n),
        u: staircase_channel(&u_units, n),
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Number of edge-connected pavements of the n-grid: C(2(n−1), n−1).
pub fn pavement_count(n: usize) -> Result<u128> {
    if n < 2 {
        return Err(Error::Domain(format!("grid side {n} must be at least 2")));
    }
    if n > 64 {
        return Err(Error::Capacity(format!(
            "pavement count for a {n}x{n} grid overflows"
        )));
    }
    Ok(binomial(2 * (n as u64 - 1), n as u64 - 1))
}

/// All pavements of the n-grid in lexicographic key order. Edge-connected
/// only by default; with `include_vertex_connected` the enumeration also
/// emits runs using diagonal steps, whose count is the central Delannoy
/// number instead of the central binomial coefficient.
pub fn enumerate_pavements_with(n: usize, include_vertex_connected: bool) -> Result<Vec<Pavement>> {
    if n < 2 {
        return Err(Error::Domain(format!("grid side {n} must be at least 2")));
    }
    let cap = if include_vertex_connected {
        MAX_ENUM_N_VERTEX
    } else {
        MAX_ENUM_N
    };
    if n > cap {
        let count = binomial(2 * (n as u64 - 1), n as u64 - 1);
        return Err(Error::Capacity(format!(
            "enumerating the {count} (or more) pavements of a {n}x{n} grid exceeds the budget (n <= {cap})"
        )));
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(2 * (n - 1));
    recurse(0, 0, n, include_vertex_connected, &mut cur, &mut out);
    Ok(out)
}

/// Edge-connected pavements of the n-grid; the count is C(2(n−1), n−1).
pub fn enumerate_pavements(n: usize) -> Result<Vec<Pavement>> {
    enumerate_pavements_with(n, false)
}

fn recurse(
    col: usize,
    row: usize,
    n: usize,
    diag: bool,
    cur: &mut Vec<Step>,
    out: &mut Vec<Pavement>,
) {
    if col == n - 1 && row == n - 1 {
        out.push(Pavement {
            n,
            steps: cur.clone(),
        });
        return;
    }
    // Branch in D < R < U order so the output is sorted by key.
    if diag && col < n - 1 && row < n - 1 {
        cur.push(Step::Diag);
        recurse(col + 1, row + 1, n, diag, cur, out);
        cur.pop();
    }
    if col < n - 1 {
        cur.push(Step::Right);
        recurse(col + 1, row, n, diag, cur, out);
        cur.pop();
    }
    if row < n - 1 {
        cur.push(Step::Up);
        recurse(col, row + 1, n, diag, cur, out);
        cur.pop();
    }
}
