//! Badness estimation over a kernel pool and greedy cover selection.
//!
//! Bundles and kernels form a bipartite graph with an edge where the kernel
//! fails the goodness test for the bundle. When every bundle is bad for at
//! most a fraction b of the pool, picking the kernel that rescues the most
//! uncovered bundles shrinks the uncovered set b-fold per round, so roughly
//! −log_b(B) + 2 kernels cover all B bundles.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{is_good, GoodnessParams};
use crate::kernel::Kernel;
use crate::quantize::Bundle;

/// The bundle × kernel badness table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadnessMatrix {
    pub bundle_keys: Vec<String>,
    pub kernel_ids: Vec<usize>,
    /// `bad[i][j]`: kernel `j` fails the goodness test for bundle `i`.
    pub bad: Vec<Vec<bool>>,
    /// Fraction of the pool that is bad for each bundle.
    pub row_badness: Vec<f64>,
    /// Pairs whose evaluation errored; such pairs are recorded as bad.
    pub failures: Vec<PairFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub bundle: usize,
    pub kernel: usize,
    pub message: String,
}

impl BadnessMatrix {
    /// Assembles a matrix from parts; used by tests to inject synthetic
    /// goodness patterns without running transforms.
    pub fn from_parts(bundle_keys: Vec<String>, bad: Vec<Vec<bool>>) -> Result<Self> {
        if bundle_keys.is_empty() || bad.len() != bundle_keys.len() {
            return Err(Error::Domain(
                "badness matrix needs one row per bundle".into(),
            ));
        }
        let kernels = bad[0].len();
        if kernels == 0 || bad.iter().any(|row| row.len() != kernels) {
            return Err(Error::Domain(
                "badness matrix rows must share one nonzero kernel count".into(),
            ));
        }
        let row_badness = bad
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count() as f64 / kernels as f64)
            .collect();
        Ok(Self {
            bundle_keys,
            kernel_ids: (0..kernels).collect(),
            bad,
            row_badness,
            failures: Vec::new(),
        })
    }

    pub fn bundle_count(&self) -> usize {
        self.bundle_keys.len()
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_ids.len()
    }

    /// Flat CSV export: one row per bundle, one 0/1 column per kernel, plus
    /// the row badness.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bundle");
        for id in &self.kernel_ids {
            out.push_str(&format!(",k{id}"));
        }
        out.push_str(",row_badness\n");
        for (i, key) in self.bundle_keys.iter().enumerate() {
            out.push_str(key);
            for j in 0..self.kernel_count() {
                out.push_str(if self.bad[i][j] { ",1" } else { ",0" });
            }
            out.push_str(&format!(",{}\n", self.row_badness[i]));
        }
        out
    }
}

/// Number of worker threads: the smaller of `POLARLAB_THREADS` (when set)
/// and the machine's available parallelism, never more than `tasks`.
pub(crate) fn worker_count(tasks: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(usize::from)
        .unwrap_or(1);
    let cap = std::env::var("POLARLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(available);
    cap.min(available).max(1).min(tasks.max(1))
}

/// Evaluates the goodness test for every (bundle, kernel) pair. Pairs are
/// independent, so they are fanned out over worker threads; the result is
/// identical for any thread count.
pub fn badness_matrix(
    bundles: &[Bundle],
    pool: &[Kernel],
    params: &GoodnessParams,
) -> Result<BadnessMatrix> {
    if bundles.is_empty() || pool.is_empty() {
        return Err(Error::Domain(
            "badness matrix needs at least one bundle and one kernel".into(),
        ));
    }
    let nk = pool.len();
    let total = bundles.len() * nk;
    let mut results: Vec<(bool, Option<String>)> = vec![(false, None); total];
    let threads = worker_count(total);
    let chunk = total.div_ceil(threads);
    std::thread::scope(|scope| {
        for (t, slot) in results.chunks_mut(chunk).enumerate() {
            let start = t * chunk;
            scope.spawn(move || {
                for (offset, cell) in slot.iter_mut().enumerate() {
                    let idx = start + offset;
                    let (bi, ki) = (idx / nk, idx % nk);
                    *cell = match is_good(&pool[ki], &bundles[bi], params) {
                        Ok(report) => (report.good, None),
                        Err(e) => (false, Some(e.to_string())),
                    };
                }
            });
        }
    });

    let mut bad = vec![vec![false; nk]; bundles.len()];
    let mut failures = Vec::new();
    for (idx, (good, err)) in results.into_iter().enumerate() {
        let (bi, ki) = (idx / nk, idx % nk);
        bad[bi][ki] = !good;
        if let Some(message) = err {
            failures.push(PairFailure {
                bundle: bi,
                kernel: ki,
                message,
            });
        }
    }
    let row_badness = bad
        .iter()
        .map(|row| row.iter().filter(|&&b| b).count() as f64 / nk as f64)
        .collect();
    Ok(BadnessMatrix {
        bundle_keys: bundles.iter().map(|b| b.pavement.key()).collect(),
        kernel_ids: (0..nk).collect(),
        bad,
        row_badness,
        failures,
    })
}

/// Result of the greedy cover.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    /// Kernel ids in selection order.
    pub selected: Vec<usize>,
    /// Bundle key → the selected kernel covering it.
    pub assignment: BTreeMap<String, usize>,
    /// Bundles bad for the whole pool; reported, never fatal.
    pub uncoverable: Vec<String>,
    /// Uncovered-bundle count after each round.
    pub rounds: Vec<usize>,
    /// Worst initial row badness over the pool.
    pub b_max: f64,
    /// −log_b(B) + 2 at b = `b_max`; 2 when b_max = 0, infinite when some
    /// bundle is uncoverable.
    pub bound: f64,
}

/// Greedily selects kernels: each round takes the kernel good for the most
/// still-uncovered bundles (ties to the lowest id) until every coverable
/// bundle is assigned.
pub fn greedy_cover(matrix: &BadnessMatrix) -> CoverReport {
    let nb = matrix.bundle_count();
    let nk = matrix.kernel_count();
    let mut uncovered: Vec<usize> = Vec::new();
    let mut uncoverable = Vec::new();
    for i in 0..nb {
        if (0..nk).any(|j| !matrix.bad[i][j]) {
            uncovered.push(i);
        } else {
            uncoverable.push(matrix.bundle_keys[i].clone());
        }
    }

    let mut selected = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut rounds = Vec::new();
    while !uncovered.is_empty() {
        let (mut best_kernel, mut best_count) = (0usize, 0usize);
        for j in 0..nk {
            let count = uncovered.iter().filter(|&&i| !matrix.bad[i][j]).count();
            if count > best_count {
                best_kernel = j;
                best_count = count;
            }
        }
        if best_count == 0 {
            break; // cannot happen once uncoverable rows are filtered out
        }
        selected.push(best_kernel);
        for &i in &uncovered {
            if !matrix.bad[i][best_kernel] {
                assignment.insert(matrix.bundle_keys[i].clone(), best_kernel);
            }
        }
        uncovered.retain(|&i| matrix.bad[i][best_kernel]);
        rounds.push(uncovered.len());
    }

    let b_max = matrix.row_badness.iter().cloned().fold(0.0f64, f64::max);
    let bound = if b_max <= 0.0 {
        2.0
    } else if b_max >= 1.0 {
        f64::INFINITY
    } else {
        bound_m(b_max, nb as u64).expect("b_max checked in (0, 1)")
    };
    CoverReport {
        selected,
        assignment,
        uncoverable,
        rounds,
        b_max,
        bound,
    }
}

/// The kernel-count bound m ≤ −log_b(B) + 2 for badness probability b and
/// bundle count B.
pub fn bound_m(b: f64, big_b: u64) -> Result<f64> {
    if !b.is_finite() || b <= 0.0 || b >= 1.0 {
        return Err(Error::Domain(format!(
            "badness probability {b} outside (0, 1)"
        )));
    }
    if big_b == 0 {
        return Err(Error::Domain("bundle count must be at least 1".into()));
    }
    Ok(-(big_b as f64).ln() / b.ln() + 2.0)
}

/// The headline scaling ℓ^{3/μ−1} for the number of kernels; informational.
pub fn kernel_count_scale(ell: usize, mu: f64) -> f64 {
    (ell as f64).powf(3.0 / mu - 1.0)
}

/// Exact minimum number of kernels covering every coverable bundle, by
/// subset enumeration over pools of at most 20 kernels.
pub fn min_cover_oracle(matrix: &BadnessMatrix) -> Result<usize> {
    let nk = matrix.kernel_count();
    if nk > 20 {
        return Err(Error::Capacity(format!(
            "exact cover enumerates 2^{nk} subsets; pools are capped at 20 kernels"
        )));
    }
    let nb = matrix.bundle_count();
    let words = nb.div_ceil(64);
    let mut target = vec![0u64; words];
    let mut covers = vec![vec![0u64; words]; nk];
    for i in 0..nb {
        let mut coverable = false;
        for (j, cover) in covers.iter_mut().enumerate() {
            if !matrix.bad[i][j] {
                cover[i / 64] |= 1 << (i % 64);
                coverable = true;
            }
        }
        if coverable {
            target[i / 64] |= 1 << (i % 64);
        }
    }
    if target.iter().all(|&w| w == 0) {
        return Ok(0);
    }
    let mut best = usize::MAX;
    for mask in 1u32..(1u32 << nk) {
        let size = mask.count_ones() as usize;
        if size >= best {
            continue;
        }
        let mut union = vec![0u64; words];
        for (j, cover) in covers.iter().enumerate() {
            if mask >> j & 1 == 1 {
                for (u, c) in union.iter_mut().zip(cover) {
                    *u |= c;
                }
            }
        }
        if union.iter().zip(&target).all(|(u, t)| u & t == *t) {
            best = size;
        }
    }
    Ok(best)
}
