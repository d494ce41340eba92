//! Binary polarization kernels and exact virtual-channel computation.
//!
//! A kernel is an ℓ×ℓ matrix G invertible over GF(2). The transform sends ℓ
//! independent uses of a channel W to the ℓ virtual channels W_G^(i): input
//! u_i, output everything a successive decoder sees (all channel outputs plus
//! the earlier inputs u_1..u_{i−1}), where the transmitted word is x = u·G.

use std::collections::BTreeMap;

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{Atom, BmsChannel};
use crate::error::{Error, Result};

/// Largest supported kernel size; rows are stored as single machine words.
pub const MAX_ELL: usize = 32;

/// Enumeration budget for [`polar_transform`]: |atoms|^ℓ · 4^ℓ must stay
/// below this before we refuse and point the caller at merging. The cap
/// admits a 4-atom mixture at kernel size 8 (the largest size worth exact
/// treatment; expect on the order of a minute there).
pub const TRANSFORM_BUDGET: f64 = 5e9;

/// Erasure-pattern budget for [`bec_transform`].
const MAX_BEC_ELL: usize = 20;

/// An ℓ×ℓ binary matrix, invertible over GF(2). Bit `j` of `rows[i]` is the
/// entry in row `i`, column `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Kernel {
    ell: usize,
    rows: Vec<u64>,
}

fn rank_gf2(mut rows: Vec<u64>) -> usize {
    let mut rank = 0;
    for col in 0..64 {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot);
        for r in 0..rows.len() {
            if r != rank && rows[r] >> col & 1 == 1 {
                rows[r] ^= rows[rank];
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

impl Kernel {
    /// Validates bit-packed rows as an invertible square matrix.
    pub fn new(rows: Vec<u64>) -> Result<Self> {
        let ell = rows.len();
        if ell == 0 || ell > MAX_ELL {
            return Err(Error::Kernel(format!(
                "kernel size {ell} outside 1..={MAX_ELL}"
            )));
        }
        let mask = if ell == 64 {
            u64::MAX
        } else {
            (1u64 << ell) - 1
        };
        if rows.iter().any(|r| r & !mask != 0) {
            return Err(Error::Kernel("matrix is not square".into()));
        }
        if rank_gf2(rows.clone()) != ell {
            return Err(Error::Kernel("matrix is singular over GF(2)".into()));
        }
        Ok(Self { ell, rows })
    }

    /// Builds a kernel from row-major bit strings such as `["10", "11"]`.
    pub fn from_rows(rows: &[impl AsRef<str>]) -> Result<Self> {
        let ell = rows.len();
        let mut packed = Vec::with_capacity(ell);
        for row in rows {
            let row = row.as_ref();
            if row.len() != ell {
                return Err(Error::Kernel(format!(
                    "row {row:?} has length {}, expected {ell}",
                    row.len()
                )));
            }
            let mut bits = 0u64;
            for (j, c) in row.chars().enumerate() {
                match c {
                    '1' => bits |= 1 << j,
                    '0' => {}
                    other => return Err(Error::Kernel(format!("invalid bit character {other:?}"))),
                }
            }
            packed.push(bits);
        }
        Self::new(packed)
    }

    /// The 2×2 kernel [[1,0],[1,1]] underlying the original construction.
    pub fn arikan() -> Self {
        Self {
            ell: 2,
            rows: vec![0b01, 0b11],
        }
    }

    /// The identity kernel of the given size.
    pub fn identity(ell: usize) -> Result<Self> {
        if ell == 0 || ell > MAX_ELL {
            return Err(Error::Kernel(format!(
                "kernel size {ell} outside 1..={MAX_ELL}"
            )));
        }
        Ok(Self {
            ell,
            rows: (0..ell).map(|i| 1u64 << i).collect(),
        })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// Row-major bit strings, the inverse of [`Kernel::from_rows`].
    pub fn row_strings(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|&r| {
                (0..self.ell)
                    .map(|j| if r >> j & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    rows: Vec<String>,
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        KernelJson {
            rows: self.row_strings(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = KernelJson::deserialize(deserializer)?;
        Kernel::from_rows(&json.rows).map_err(serde::de::Error::custom)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent per-task seed from one master seed, so parallel
/// work stays reproducible regardless of scheduling.
pub fn split_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(splitmix64(index)))
}

/// Samples a kernel uniformly over all invertible ℓ×ℓ binary matrices by
/// rejection from uniform bit matrices. Deterministic for a fixed seed; the
/// acceptance probability exceeds 1/4 for every ℓ.
pub fn sample_invertible(ell: usize, seed: u64) -> Result<Kernel> {
    if ell < 2 {
        return Err(Error::Domain(format!(
            "kernel size {ell} must be at least 2"
        )));
    }
    if ell > MAX_ELL {
        return Err(Error::Kernel(format!(
            "kernel size {ell} outside 1..={MAX_ELL}"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mask = (1u64 << ell) - 1;
    loop {
        let rows: Vec<u64> = (0..ell).map(|_| rng.next_u64() & mask).collect();
        if rank_gf2(rows.clone()) == ell {
            return Ok(Kernel { ell, rows });
        }
    }
}

/// Exact polar transform of a finite BSC mixture under an arbitrary kernel.
///
/// The mixture is expanded as revealed side information: an assignment of one
/// atom per position is drawn with the product of the masses, after which the
/// word x = u·G passes through independent BSCs. For each virtual channel the
/// posterior of u_i given (assignment, outputs, earlier inputs) is collected
/// output by output, and symmetric outputs with equal crossover are fused.
///
/// Cost is |atoms|^ℓ · 4^ℓ; inputs past [`TRANSFORM_BUDGET`] are rejected.
pub fn polar_transform(w: &BmsChannel, g: &Kernel) -> Result<Vec<BmsChannel>> {
    let ell = g.ell;
    let ka = w.atoms().len();
    let cost = (ka as f64).powi(ell as i32) * 4f64.powi(ell as i32);
    if cost > TRANSFORM_BUDGET {
        return Err(Error::Capacity(format!(
            "transform enumeration needs {cost:.3e} states for {ka} atoms at kernel size {ell}; \
             merge() the channel to fewer atoms first"
        )));
    }
    let size = 1usize << ell;

    // x = u·G for every input word u (bit i of u is coordinate u_i).
    let xs: Vec<u64> = (0..size as u64)
        .map(|u| {
            let mut x = 0u64;
            for i in 0..ell {
                if u >> i & 1 == 1 {
                    x ^= g.rows[i];
                }
            }
            x
        })
        .collect();

    // Per channel: posterior bucket (crossover rounded to 1e-12) ->
    // (total mass, mass-weighted crossover).
    let mut buckets: Vec<BTreeMap<i64, (f64, f64)>> = vec![BTreeMap::new(); ell];

    let atoms = w.atoms();
    let mut assign = vec![0usize; ell];
    let mut noise = vec![0.0f64; size];
    let mut t = vec![0.0f64; size];
    loop {
        let weight: f64 = assign.iter().map(|&k| atoms[k].mass).product();
        if weight > 0.0 {
            // Likelihood of each error pattern under this atom assignment.
            for (z, slot) in noise.iter_mut().enumerate() {
                let mut prob = 1.0;
                for (j, &k) in assign.iter().enumerate() {
                    let p = atoms[k].p;
                    prob *= if z >> j & 1 == 1 { p } else { 1.0 - p };
                }
                *slot = prob;
            }
            let scale = weight / size as f64;
            for y in 0..size {
                for u in 0..size {
                    t[u] = noise[(xs[u] ^ y as u64) as usize];
                }
                // Fold out the trailing coordinates one at a time. After the
                // step for channel i, t[v] holds the likelihood sum over all
                // u agreeing with prefix v on coordinates 0..=i.
                for i in (0..ell).rev() {
                    let half = 1usize << i;
                    for v in 0..half {
                        let w0 = t[v];
                        let w1 = t[v + half];
                        let tot = w0 + w1;
                        if tot > 0.0 {
                            let q = w0.min(w1) / tot;
                            let key = (q * 1e12).round() as i64;
                            let entry = buckets[i].entry(key).or_insert((0.0, 0.0));
                            let mass = scale * tot;
                            entry.0 += mass;
                            entry.1 += mass * q;
                        }
                        t[v] = tot;
                    }
                }
            }
        }
        // Odometer over atom assignments.
        let mut pos = 0;
        loop {
            if pos == ell {
                break;
            }
            assign[pos] += 1;
            if assign[pos] < ka {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
        if pos == ell {
            break;
        }
    }

    Ok(buckets
        .into_iter()
        .map(|b| {
            BmsChannel::canonicalize(
                b.into_values()
                    .map(|(mass, pm)| Atom { p: pm / mass, mass })
                    .collect(),
            )
        })
        .collect())
}

/// Exact erasure probabilities of the virtual channels when the input is a
/// BEC. Position j of x = u·G is erased independently with probability `eps`;
/// u_i is recovered exactly when the unit functional e_i lies in the span of
/// the unerased columns of G together with e_1..e_{i−1}.
pub fn bec_transform(eps: f64, g: &Kernel) -> Result<Vec<f64>> {
    if !eps.is_finite() || !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!(
            "erasure probability {eps} outside [0, 1]"
        )));
    }
    let ell = g.ell;
    if ell > MAX_BEC_ELL {
        return Err(Error::Capacity(format!(
            "erasure-pattern enumeration needs 2^{ell} patterns; kernel size is capped at {MAX_BEC_ELL}"
        )));
    }
    // Column j of G as a linear functional on u, packed over coordinates.
    let cols: Vec<u64> = (0..ell)
        .map(|j| (0..ell).fold(0u64, |m, i| m | ((g.rows[i] >> j & 1) << i)))
        .collect();

    let mut out = vec![0.0f64; ell];
    for pattern in 0..(1u64 << ell) {
        let mut prob = 1.0;
        for j in 0..ell {
            prob *= if pattern >> j & 1 == 1 {
                eps
            } else {
                1.0 - eps
            };
        }
        if prob == 0.0 {
            continue;
        }
        // Reduced basis of the available functionals, grown with each e_i
        // after channel i is scored.
        let mut basis: Vec<u64> = Vec::with_capacity(2 * ell);
        for (j, &c) in cols.iter().enumerate() {
            if pattern >> j & 1 == 0 {
                insert_reduced(&mut basis, c);
            }
        }
        for (i, slot) in out.iter_mut().enumerate() {
            let e = 1u64 << i;
            if reduce(&basis, e) != 0 {
                *slot += prob;
            }
            insert_reduced(&mut basis, e);
        }
    }
    Ok(out)
}

fn reduce(basis: &[u64], mut v: u64) -> u64 {
    for &b in basis {
        v = v.min(v ^ b);
    }
    v
}

fn insert_reduced(basis: &mut Vec<u64>, v: u64) {
    let r = reduce(basis, v);
    if r != 0 {
        basis.push(r);
        basis.sort_unstable_by(|a, b| b.cmp(a));
    }
}
