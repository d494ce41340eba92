//! Random-coding exponents and the goodness test for (kernel, bundle) pairs.
//!
//! A kernel is good for a bundle when the leaked capacity of the first j
//! virtual channels of the upgraded boundary and the residual entropy of the
//! last ℓ−k virtual channels of the degraded boundary both fall below the
//! cutoff θ. Degradation transfers per index, so a kernel good for both
//! boundaries is good for every channel sandwiched between them.

use serde::{Deserialize, Serialize};

use crate::channel::BmsChannel;
use crate::error::{Error, Result};
use crate::kernel::{polar_transform, Kernel};
use crate::quantize::Bundle;

/// α = ln(ln ℓ) / ln ℓ, defined for ℓ ≥ 3.
pub fn alpha(ell: usize) -> Result<f64> {
    if ell < 3 {
        return Err(Error::Domain(format!(
            "kernel size {ell} must be at least 3 for the slack exponent"
        )));
    }
    let l = (ell as f64).ln();
    Ok(l.ln() / l)
}

/// θ = exp(−c·ℓ^{2α}), the goodness cutoff.
pub fn theta(ell: usize, c: f64) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::Domain(format!(
            "cutoff constant {c} must be positive"
        )));
    }
    let a = alpha(ell)?;
    Ok((-c * (ell as f64).powf(2.0 * a)).exp())
}

/// The potential function (H(W)·(1 − H(W)))^α: zero exactly at the two
/// polarization extremes.
pub fn potential_h(w: &BmsChannel, ell: usize) -> Result<f64> {
    let a = alpha(ell)?;
    let h = w.entropy();
    Ok((h * (1.0 - h)).max(0.0).powf(a))
}

/// Gallager's E0 in bits, evaluated on the explicit output alphabet of the
/// mixture (atom identity × output bit) under the uniform binary input:
///
///   E0(ρ) = −log2 Σ_outputs [ Σ_x ½·P(output|x)^{1/(1+ρ)} ]^{1+ρ}.
pub fn gallager_e0(w: &BmsChannel, rho: f64) -> Result<f64> {
    if !rho.is_finite() || !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho {rho} outside [0, 1]")));
    }
    Ok(e0_unchecked(w, rho))
}

fn e0_unchecked(w: &BmsChannel, rho: f64) -> f64 {
    if rho == 0.0 {
        // Normalization: the inner bracket reduces to the output probability.
        return 0.0;
    }
    let s = 1.0 / (1.0 + rho);
    let mut total = 0.0;
    for a in w.atoms() {
        for flip in [false, true] {
            let (w0, w1) = if flip {
                (a.mass * a.p, a.mass * (1.0 - a.p))
            } else {
                (a.mass * (1.0 - a.p), a.mass * a.p)
            };
            total += (0.5 * w0.powf(s) + 0.5 * w1.powf(s)).powf(1.0 + rho);
        }
    }
    -total.log2()
}

/// The random-coding error exponent Er(R) = max_{ρ ∈ [0,1]} E0(ρ) − ρR,
/// by golden-section search on the concave objective, with both endpoints
/// folded into the final maximum.
pub fn error_exponent(w: &BmsChannel, rate: f64) -> Result<f64> {
    if !rate.is_finite() || !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("rate {rate} outside [0, 1]")));
    }
    let f = |rho: f64| e0_unchecked(w, rho) - rho * rate;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Ok(f(0.0).max(f(1.0)).max(fc.max(fd)))
}

/// Parameters of the goodness test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessParams {
    /// Targeted scaling exponent, must exceed 2.
    pub mu: f64,
    /// The constant c in θ = exp(−c·ℓ^{2α}).
    pub theta_const: f64,
    /// Whether the index slack is ℓ^{1−1/μ+α} (true) or ℓ^{1−1/μ} (false).
    pub use_alpha_slack: bool,
}

impl GoodnessParams {
    pub fn new(mu: f64, theta_const: f64, use_alpha_slack: bool) -> Result<Self> {
        if !mu.is_finite() || mu <= 2.0 {
            return Err(Error::Domain(format!(
                "scaling exponent {mu} must be greater than 2"
            )));
        }
        if !theta_const.is_finite() || theta_const <= 0.0 {
            return Err(Error::Domain(format!(
                "cutoff constant {theta_const} must be positive"
            )));
        }
        Ok(Self {
            mu,
            theta_const,
            use_alpha_slack,
        })
    }
}

impl Default for GoodnessParams {
    fn default() -> Self {
        Self {
            mu: 3.0,
            theta_const: 1.0,
            use_alpha_slack: true,
        }
    }
}

/// Outcome of the goodness test for one (kernel, bundle) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub j: usize,
    pub k: usize,
    pub theta: f64,
    pub sum_i: f64,
    pub sum_h: f64,
    pub good: bool,
}

/// Index thresholds j = ⌊H(D)·ℓ − slack⌋ and k = ⌈H(U)·ℓ + slack⌉, clamped
/// into [0, ℓ] with j ≤ k.
pub fn goodness_thresholds(
    ell: usize,
    h_d: f64,
    h_u: f64,
    params: &GoodnessParams,
) -> Result<(usize, usize)> {
    let exponent = 1.0 - 1.0 / params.mu
        + if params.use_alpha_slack {
            alpha(ell)?
        } else {
            0.0
        };
    let slack = (ell as f64).powf(exponent);
    let l = ell as f64;
    let j = (h_d * l - slack).floor().clamp(0.0, l) as usize;
    let k = (h_u * l + slack).ceil().clamp(0.0, l) as usize;
    Ok((j.min(k), k))
}

/// Tests one kernel against one bundle: transforms both boundary channels
/// and compares the two partial sums against θ.
pub fn is_good(g: &Kernel, bundle: &Bundle, params: &GoodnessParams) -> Result<GoodnessReport> {
    let ell = g.ell();
    let th = theta(ell, params.theta_const)?;
    let (j, k) = goodness_thresholds(ell, bundle.d.entropy(), bundle.u.entropy(), params)?;
    let sum_i = if j > 0 {
        let up = polar_transform(&bundle.u, g)?;
        up[..j].iter().map(BmsChannel::capacity).sum()
    } else {
        0.0
    };
    let sum_h = if k < ell {
        let down = polar_transform(&bundle.d, g)?;
        down[k..].iter().map(BmsChannel::entropy).sum()
    } else {
        0.0
    };
    Ok(GoodnessReport {
        j,
        k,
        theta: th,
        sum_i,
        sum_h,
        good: sum_i < th && sum_h < th,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::h2_inv;
    use crate::kernel::sample_invertible;
    use crate::quantize::{bundle_endpoints, Bundle};

    #[test]
    fn alpha_values() {
        assert!((alpha(16).unwrap() - 0.36785).abs() < 1e-4);
        // ℓ = e^e ≈ 15.15 is the fixed point where α = 1/e.
        assert!((alpha(15).unwrap() - 1.0 / std::f64::consts::E).abs() < 0.02);
        assert!(alpha(2).is_err());
    }

    #[test]
    fn theta_values() {
        // θ → 1 as c → 0 and decreases in c.
        let mut prev = 1.0;
        for c in [1e-9, 1e-3, 0.1, 1.0, 10.0] {
            let t = theta(16, c).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!((theta(16, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!(theta(16, 0.0).is_err());
        assert!(theta(2, 1.0).is_err());
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential_h(&BmsChannel::noiseless(), 16).unwrap(), 0.0);
        assert_eq!(potential_h(&BmsChannel::full_noise(), 16).unwrap(), 0.0);
        let w = BmsChannel::bsc(h2_inv(0.5)).unwrap();
        assert!((potential_h(&w, 16).unwrap() - 0.601).abs() < 1e-3);
    }

    #[test]
    fn e0_bec_closed_form() {
        for eps in [0.1, 0.3, 0.5, 0.9] {
            let w = BmsChannel::bec(eps).unwrap();
            for k in 0..=10 {
                let rho = k as f64 / 10.0;
                let expected = -(eps + (1.0 - eps) * 2f64.powf(-rho)).log2();
                assert!((gallager_e0(&w, rho).unwrap() - expected).abs() < 1e-9);
            }
        }
        let w = BmsChannel::bec(0.5).unwrap();
        assert!((gallager_e0(&w, 1.0).unwrap() - 0.4150374992788438).abs() < 1e-9);
    }

    #[test]
    fn e0_zero_and_slope() {
        for w in [
            BmsChannel::bsc(0.11).unwrap(),
            BmsChannel::bec(0.3).unwrap(),
        ] {
            assert_eq!(gallager_e0(&w, 0.0).unwrap(), 0.0);
            let h = 1e-4;
            let slope = gallager_e0(&w, h).unwrap() / h;
            assert!((slope - w.capacity()).abs() < 1e-3);
        }
        assert!(gallager_e0(&BmsChannel::bsc(0.11).unwrap(), 1.5).is_err());
    }

    #[test]
    fn e0_concavity() {
        let w = BmsChannel::bsc(0.11).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| gallager_e0(&w, r).unwrap()).collect();
        for i in 0..grid.len() - 2 {
            let (r1, r2, r3) = (grid[i], grid[i + 1], grid[i + 2]);
            let chord = ((r3 - r2) * vals[i] + (r2 - r1) * vals[i + 2]) / (r3 - r1);
            assert!(vals[i + 1] >= chord - 1e-9);
        }
    }

    #[test]
    fn error_exponent_cases() {
        for w in [
            BmsChannel::bsc(0.11).unwrap(),
            BmsChannel::bec(0.3).unwrap(),
        ] {
            // Zero at capacity, E0(1) at rate zero, non-increasing between.
            assert!(error_exponent(&w, w.capacity()).unwrap().abs() <= 1e-9);
            let at_zero = error_exponent(&w, 0.0).unwrap();
            assert!((at_zero - gallager_e0(&w, 1.0).unwrap()).abs() < 1e-12);
            let mut prev = f64::INFINITY;
            for k in 0..20 {
                let r = k as f64 / 19.0;
                let er = error_exponent(&w, r).unwrap();
                assert!(er <= prev + 1e-12);
                prev = er;
            }
        }
        assert!(error_exponent(&BmsChannel::bsc(0.11).unwrap(), -0.1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(GoodnessParams::new(2.0, 1.0, true).is_err());
        assert!(GoodnessParams::new(3.0, 0.0, true).is_err());
        assert!(GoodnessParams::new(2.5, 0.5, false).is_ok());
    }

    #[test]
    fn thresholds_always_clamped() {
        let params = GoodnessParams::default();
        for ell in [3usize, 4, 8, 16] {
            for step in 0..=10 {
                let h_d = step as f64 / 10.0;
                for gap in [0.0, 0.1, 0.5] {
                    let h_u = (h_d - gap).max(0.0);
                    let (j, k) = goodness_thresholds(ell, h_d, h_u, &params).unwrap();
                    assert!(j <= k && k <= ell);
                }
            }
        }
    }

    #[test]
    fn degenerate_bundles_are_good() {
        let params = GoodnessParams::default();
        for ell in [3usize, 4] {
            let noiseless = Bundle::degenerate(&BmsChannel::noiseless(), 2).unwrap();
            let noisy = Bundle::degenerate(&BmsChannel::full_noise(), 2).unwrap();
            for seed in 0..5u64 {
                let g = sample_invertible(ell, seed).unwrap();
                let r = is_good(&g, &noiseless, &params).unwrap();
                assert!(r.good && r.j == 0 && r.sum_h == 0.0);
                let r = is_good(&g, &noisy, &params).unwrap();
                assert!(r.good && r.k == ell && r.sum_i == 0.0);
            }
        }
    }

    #[test]
    fn report_matches_independent_recomputation() {
        // 4x4 lower-triangular-plus kernel against the lower n=2 bundle,
        // with the sums rebuilt directly from the transform outputs.
        let g = Kernel::from_rows(&["1000", "1100", "1010", "1111"]).unwrap();
        let bundle = bundle_endpoints(&"RU".parse().unwrap());
        for use_alpha in [true, false] {
            let params = GoodnessParams::new(3.0, 1.0, use_alpha).unwrap();
            let report = is_good(&g, &bundle, &params).unwrap();

            let ell = 4usize;
            let a = (4f64.ln().ln()) / 4f64.ln();
            let slack = 4f64.powf(1.0 - 1.0 / 3.0 + if use_alpha { a } else { 0.0 });
            let j = ((bundle.d.entropy() * 4.0 - slack).floor().max(0.0) as usize).min(ell);
            let k = ((bundle.u.entropy() * 4.0 + slack).ceil().max(0.0) as usize).min(ell);
            assert_eq!((report.j, report.k), (j.min(k), k));

            let up = polar_transform(&bundle.u, &g).unwrap();
            let down = polar_transform(&bundle.d, &g).unwrap();
            let sum_i: f64 = up.iter().take(report.j).map(|c| 1.0 - c.entropy()).sum();
            let sum_h: f64 = down.iter().skip(report.k).map(|c| c.entropy()).sum();
            assert!((report.sum_i - sum_i).abs() < 1e-12);
            assert!((report.sum_h - sum_h).abs() < 1e-12);
            let th = (-(4f64.powf(2.0 * a))).exp();
            assert!((report.theta - th).abs() < 1e-12);
            assert_eq!(report.good, sum_i < th && sum_h < th);
        }
    }

    #[test]
    fn monotone_transfer_of_partial_capacity_sums() {
        // For a degraded pair, prefix capacity sums for the degraded side
        // never exceed those for the upgraded side.
        let u = BmsChannel::new(vec![
            crate::channel::Atom { p: 0.05, mass: 0.5 },
            crate::channel::Atom { p: 0.3, mass: 0.5 },
        ])
        .unwrap();
        let d = u.merge(crate::channel::MergeDirection::Degrade, 1).unwrap();
        for seed in 0..5u64 {
            let g = sample_invertible(3, seed).unwrap();
            let tu = polar_transform(&u, &g).unwrap();
            let td = polar_transform(&d, &g).unwrap();
            let mut su = 0.0;
            let mut sd = 0.0;
            for i in 0..3 {
                su += tu[i].capacity();
                sd += td[i].capacity();
                assert!(sd <= su + 1e-12);
            }
        }
    }

    #[test]
    fn sandwich_slack_bound() {
        // Any channel inside a bundle keeps j above H(W)ℓ − 3·slack.
        let params = GoodnessParams::default();
        let bundle = bundle_endpoints(&"RU".parse().unwrap());
        let ell = 4usize;
        let (j, _) =
            goodness_thresholds(ell, bundle.d.entropy(), bundle.u.entropy(), &params).unwrap();
        let slack = (ell as f64).powf(1.0 - 1.0 / params.mu + alpha(ell).unwrap());
        for w in [&bundle.d, &bundle.u] {
            assert!(j as f64 > w.entropy() * ell as f64 - 3.0 * slack);
        }
    }

    #[test]
    fn report_json_fields() {
        let report = GoodnessReport {
            j: 1,
            k: 3,
            theta: 0.25,
            sum_i: 0.0,
            sum_h: 0.125,
            good: true,
        };
        let text = serde_json::to_string(&report).unwrap();
        assert_eq!(
            text,
            r#"{"j":1,"k":3,"theta":0.25,"sum_i":0.0,"sum_h":0.125,"good":true}"#
        );
    }
}
