//! Layer-by-layer weight propagation, exact fusion of correlated estimates,
//! final-estimate variance and bias, and Monte Carlo simulation.
//!
//! Each agent combines its in-neighbors' estimates with the minimum-variance
//! unbiased weights; because every estimate is a linear combination of the
//! first-layer measurements, the whole pipeline reduces to exact rational
//! algebra on weight vectors over those measurements.

use crate::linalg::{
    bigint_mod_filter_prime, dot, dot_scaled, integerize_row, solve_square, IntEchelon,
    LinalgError, ModPEchelon, RatMatrix,
};
use crate::net::{LayeredNetwork, PrecisionVector};
use crate::rat::{format_rat, rat_to_f64, Rat};
use crate::seeding::{derive_seed, GENERATOR_NAME};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("no provider carries any information")]
    NoInformation,
    #[error("provider row {index} sums to {sum}, expected exactly 1")]
    NonUnitRowSum { index: usize, sum: String },
    #[error("provider row {index} has length {found}, expected {expected}")]
    RowLength {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("precision vector has {found} entries, expected first layer size {expected}")]
    PrecisionLength { found: usize, expected: usize },
    #[error("bias vector has {found} entries, expected {expected}")]
    BiasLength { found: usize, expected: usize },
    #[error("need at least {min} trials, got {found}")]
    TooFewTrials { min: u64, found: u64 },
    #[error("internal linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
}

/// Weights one layer's agents apply to the first-layer measurements.
/// Row i of `rows` belongs to agent i+1; `valid[i]` is false when that agent
/// receives no information at all, in which case the row is identically zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightProfile {
    pub rows: RatMatrix,
    pub valid: Vec<bool>,
}

impl WeightProfile {
    /// (0-based agent index, weight row) for every information-carrying agent.
    pub fn valid_rows(&self) -> Vec<(usize, &[Rat])> {
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| (i, self.rows.row(i)))
            .collect()
    }
}

/// Covariances between one layer's estimates, A diag(1/w) A^T for the layer's
/// weight profile A. Rows of invalid agents are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CovarianceMatrix {
    pub entries: RatMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Propagation {
    pub profiles: Vec<WeightProfile>,
    pub covariances: Vec<CovarianceMatrix>,
}

/// The implicit final agent's combination of first-layer measurements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalEstimate {
    pub alpha: Vec<Rat>,
    pub variance: Rat,
    /// 1 / sum(w): what a direct look at all measurements would achieve.
    pub ideal_variance: Rat,
}

/// Result of fusing provider estimates: `beta` are the combination weights
/// over the providers (zero off the kept subset), `fused_row` the resulting
/// weights over first-layer measurements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fusion {
    pub beta: Vec<Rat>,
    pub fused_row: Vec<Rat>,
    /// Indices of the greedily kept, linearly independent providers.
    pub kept: Vec<usize>,
}

fn check_rows(
    provider_rows: &[&[Rat]],
    precisions: &PrecisionVector,
) -> Result<(), EstimationError> {
    if provider_rows.is_empty() {
        return Err(EstimationError::NoInformation);
    }
    let n = precisions.len();
    for (index, row) in provider_rows.iter().enumerate() {
        if row.len() != n {
            return Err(EstimationError::RowLength {
                index: index + 1,
                found: row.len(),
                expected: n,
            });
        }
        let mut sum = Rat::zero();
        for v in row.iter() {
            sum += v;
        }
        if !sum.is_one() {
            return Err(EstimationError::NonUnitRowSum {
                index: index + 1,
                sum: format_rat(&sum),
            });
        }
    }
    Ok(())
}

/// Minimum-variance unbiased combination of correlated provider estimates.
///
/// Dependent rows add nothing (the measurement covariance diag(1/w) is
/// positive definite), so the lexicographically earliest maximal independent
/// subset is kept and the rest get weight zero. The greedy, ascending-index
/// choice makes results reproducible, and the discard never changes the
/// estimate itself: the fused row is the unique variance minimizer over the
/// providers' span with coefficient sum 1, which depends only on the span.
pub fn fuse(
    provider_rows: &[&[Rat]],
    precisions: &PrecisionVector,
) -> Result<Fusion, EstimationError> {
    check_rows(provider_rows, precisions)?;
    let n = precisions.len();
    // Independence screening runs mod a large prime, which is sound in the
    // keep direction; the rare "dependent" verdicts are confirmed with exact
    // integer elimination before a row is dropped, building that echelon
    // only when first needed.
    let mut modp = ModPEchelon::new(n);
    let mut exact: Option<IntEchelon> = None;
    let mut kept: Vec<usize> = Vec::new();
    let mut kept_int: Vec<Vec<BigInt>> = Vec::new();
    for (i, row) in provider_rows.iter().enumerate() {
        let int_row = integerize_row(row);
        let residues: Vec<u64> = int_row.iter().map(bigint_mod_filter_prime).collect();
        let independent = if modp.insert(residues) {
            true
        } else {
            let ech = exact.get_or_insert_with(|| {
                let mut e = IntEchelon::new(n);
                for r in &kept_int {
                    e.insert(r);
                }
                e
            });
            !ech.contains(&int_row)
        };
        if independent {
            if let Some(ech) = exact.as_mut() {
                ech.insert(&int_row);
            }
            kept_int.push(int_row);
            kept.push(i);
        }
    }
    let inv_w = precisions.inverses();
    let s = kept.len();
    let mut r = RatMatrix::zeros(s, s);
    for a in 0..s {
        for b in a..s {
            let v = dot_scaled(provider_rows[kept[a]], provider_rows[kept[b]], &inv_w);
            r.set(a, b, v.clone());
            r.set(b, a, v);
        }
    }
    let y = solve_square(&r, &vec![Rat::one(); s])?;
    let mut total = Rat::zero();
    for v in &y {
        total += v;
    }
    let mut beta = vec![Rat::zero(); provider_rows.len()];
    let mut fused_row = vec![Rat::zero(); n];
    for (slot, &orig) in kept.iter().enumerate() {
        let coeff = &y[slot] / &total;
        for (acc, v) in fused_row.iter_mut().zip(provider_rows[orig]) {
            if !v.is_zero() {
                *acc += &coeff * v;
            }
        }
        beta[orig] = coeff;
    }
    debug_assert!(fused_row.iter().fold(Rat::zero(), |a, v| a + v).is_one());
    Ok(Fusion {
        beta,
        fused_row,
        kept,
    })
}

/// The per-layer weight profiles, without covariances. Layer 1 applies the
/// identity; each later agent fuses the valid rows of its in-neighbors, and an
/// agent with no valid in-neighbor is itself invalid with a zero row.
pub fn weight_profiles(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
) -> Result<Vec<WeightProfile>, EstimationError> {
    let first = net.layer_size(1);
    if precisions.len() != first {
        return Err(EstimationError::PrecisionLength {
            found: precisions.len(),
            expected: first,
        });
    }
    let mut profiles = Vec::with_capacity(net.layer_count());
    profiles.push(WeightProfile {
        rows: RatMatrix::identity(first),
        valid: vec![true; first],
    });
    for layer in 2..=net.layer_count() {
        let conn = net.connectivity(layer - 1);
        let prev = profiles.last().expect("previous layer exists");
        let size = net.layer_size(layer);
        let mut rows = RatMatrix::zeros(size, first);
        let mut valid = vec![false; size];
        for (agent, is_valid) in valid.iter_mut().enumerate() {
            let providers: Vec<&[Rat]> = conn
                .row_support(agent)
                .into_iter()
                .filter(|&j| prev.valid[j])
                .map(|j| prev.rows.row(j))
                .collect();
            if providers.is_empty() {
                continue;
            }
            let fusion = fuse(&providers, precisions)?;
            for (col, v) in fusion.fused_row.into_iter().enumerate() {
                if !v.is_zero() {
                    rows.set(agent, col, v);
                }
            }
            *is_valid = true;
        }
        profiles.push(WeightProfile { rows, valid });
    }
    Ok(profiles)
}

/// Covariance of one layer's estimates from its weight profile.
pub fn covariance_of(profile: &WeightProfile, precisions: &PrecisionVector) -> CovarianceMatrix {
    let k = profile.rows.rows();
    let inv_w = precisions.inverses();
    let mut entries = RatMatrix::zeros(k, k);
    for i in 0..k {
        if !profile.valid[i] {
            continue;
        }
        for j in i..k {
            if !profile.valid[j] {
                continue;
            }
            let v = dot_scaled(profile.rows.row(i), profile.rows.row(j), &inv_w);
            entries.set(i, j, v.clone());
            entries.set(j, i, v);
        }
    }
    CovarianceMatrix { entries }
}

/// Weight profiles and covariance matrices for every layer.
pub fn propagate(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
) -> Result<Propagation, EstimationError> {
    let profiles = weight_profiles(net, precisions)?;
    let covariances = profiles
        .iter()
        .map(|p| covariance_of(p, precisions))
        .collect();
    Ok(Propagation {
        profiles,
        covariances,
    })
}

/// Final estimate from an already-computed last-layer profile.
pub fn final_estimate_from(
    last: &WeightProfile,
    precisions: &PrecisionVector,
) -> Result<FinalEstimate, EstimationError> {
    let providers: Vec<&[Rat]> = last.valid_rows().into_iter().map(|(_, row)| row).collect();
    if providers.is_empty() {
        return Err(EstimationError::NoInformation);
    }
    let fusion = fuse(&providers, precisions)?;
    let inv_w = precisions.inverses();
    let variance = dot_scaled(&fusion.fused_row, &fusion.fused_row, &inv_w);
    let ideal_variance = Rat::one() / precisions.sum();
    Ok(FinalEstimate {
        alpha: fusion.fused_row,
        variance,
        ideal_variance,
    })
}

/// The implicit final agent's weights over first-layer measurements, its
/// variance, and the ideal variance 1/sum(w).
pub fn final_estimate(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
) -> Result<FinalEstimate, EstimationError> {
    let profiles = weight_profiles(net, precisions)?;
    final_estimate_from(profiles.last().expect("at least one layer"), precisions)
}

/// Systematic error of the final estimate under per-measurement biases:
/// sum of alpha_i * b_i. Bounded by max |b_i| whenever alpha sums to 1 with
/// nonnegative entries.
pub fn final_bias(alpha: &[Rat], biases: &[Rat]) -> Result<Rat, EstimationError> {
    if alpha.len() != biases.len() {
        return Err(EstimationError::BiasLength {
            found: biases.len(),
            expected: alpha.len(),
        });
    }
    Ok(dot(alpha, biases))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub seed: u64,
    pub generator: &'static str,
    pub mean: f64,
    /// Unbiased sample variance of the final estimate.
    pub variance: f64,
    /// Asymptotic standard error of that sample variance, from the fourth
    /// central moment: sqrt((m4 - m2^2) / trials).
    pub variance_se: f64,
}

/// Trials per deterministic chunk. Chunking is a function of the trial count
/// alone, so scheduling never changes which random numbers a trial sees.
const CHUNK_TRIALS: u64 = 8192;

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

/// Draws Gaussian measurements around `true_s` (plus optional per-measurement
/// biases), applies the final weights, and summarizes the sampled estimates.
///
/// Trials are split into fixed-size chunks; chunk c uses a ChaCha8 stream
/// seeded by derive_seed(seed, [c]). Chunks run in parallel but their partial
/// sums are combined in chunk order, so output is byte-identical for any
/// thread count.
pub fn simulate(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
    true_s: f64,
    biases: Option<&[f64]>,
    trials: u64,
    seed: u64,
) -> Result<SimulationSummary, EstimationError> {
    if trials < 2 {
        return Err(EstimationError::TooFewTrials {
            min: 2,
            found: trials,
        });
    }
    if let Some(b) = biases {
        if b.len() != precisions.len() {
            return Err(EstimationError::BiasLength {
                found: b.len(),
                expected: precisions.len(),
            });
        }
    }
    let fe = final_estimate(net, precisions)?;
    let alpha: Vec<f64> = fe.alpha.iter().map(rat_to_f64).collect();
    let sigma: Vec<f64> = precisions
        .values()
        .iter()
        .map(|w| rat_to_f64(w).sqrt().recip())
        .collect();
    let shift: Vec<f64> = match biases {
        Some(b) => b.iter().map(|&bi| true_s + bi).collect(),
        None => vec![true_s; precisions.len()],
    };
    // Accumulate around the analytic mean so the moment sums stay small.
    let center: f64 = alpha.iter().zip(&shift).map(|(a, s)| a * s).sum();

    let n_chunks = trials.div_ceil(CHUNK_TRIALS);
    let partials: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[chunk]));
            let lo = chunk * CHUNK_TRIALS;
            let hi = (lo + CHUNK_TRIALS).min(trials);
            let mut m = Moments::default();
            for _ in lo..hi {
                let mut estimate = 0.0;
                for i in 0..alpha.len() {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    estimate += alpha[i] * (shift[i] + sigma[i] * noise);
                }
                let d = estimate - center;
                let d2 = d * d;
                m.n += 1;
                m.s1 += d;
                m.s2 += d2;
                m.s3 += d2 * d;
                m.s4 += d2 * d2;
            }
            m
        })
        .collect();

    let mut total = Moments::default();
    for m in partials {
        total.n += m.n;
        total.s1 += m.s1;
        total.s2 += m.s2;
        total.s3 += m.s3;
        total.s4 += m.s4;
    }
    let n = total.n as f64;
    let m1 = total.s1 / n;
    let m2 = total.s2 / n - m1 * m1;
    let m4 = total.s4 / n - 4.0 * m1 * total.s3 / n + 6.0 * m1 * m1 * total.s2 / n
        - 3.0 * m1 * m1 * m1 * m1;
    let variance = (total.s2 - n * m1 * m1) / (n - 1.0);
    let variance_se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    Ok(SimulationSummary {
        trials,
        seed,
        generator: GENERATOR_NAME,
        mean: center + m1,
        variance,
        variance_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::network_from_rows;
    use crate::rat::{rat, rat_int};

    fn w_ones(n: usize) -> PrecisionVector {
        PrecisionVector::ones(n)
    }

    fn rows(data: &[&[Rat]]) -> Vec<Vec<Rat>> {
        data.iter().map(|r| r.to_vec()).collect()
    }

    fn overlap_pair() -> LayeredNetwork {
        network_from_rows(vec![3, 2], &[vec![vec![1, 1, 0], vec![0, 1, 1]]]).unwrap()
    }

    fn shared_cycle() -> LayeredNetwork {
        network_from_rows(
            vec![3, 3],
            &[vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]],
        )
        .unwrap()
    }

    #[test]
    fn fuse_independent_rows() {
        let r = rows(&[
            &[rat_int(1), rat_int(0), rat_int(0)],
            &[rat_int(0), rat_int(1), rat_int(0)],
        ]);
        let refs: Vec<&[Rat]> = r.iter().map(|x| x.as_slice()).collect();
        let f = fuse(&refs, &w_ones(3)).unwrap();
        assert_eq!(f.beta, vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(f.fused_row, vec![rat(1, 2), rat(1, 2), rat_int(0)]);
        assert_eq!(f.kept, vec![0, 1]);
    }

    #[test]
    fn fuse_overlapping_rows() {
        let r = rows(&[
            &[rat(1, 2), rat(1, 2), rat_int(0)],
            &[rat_int(0), rat(1, 2), rat(1, 2)],
        ]);
        let refs: Vec<&[Rat]> = r.iter().map(|x| x.as_slice()).collect();
        let f = fuse(&refs, &w_ones(3)).unwrap();
        assert_eq!(f.beta, vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(f.fused_row, vec![rat(1, 4), rat(1, 2), rat(1, 4)]);
    }

    #[test]
    fn fuse_drops_duplicate() {
        let r = rows(&[
            &[rat_int(1), rat_int(0)],
            &[rat_int(1), rat_int(0)],
        ]);
        let refs: Vec<&[Rat]> = r.iter().map(|x| x.as_slice()).collect();
        let f = fuse(&refs, &w_ones(2)).unwrap();
        assert_eq!(f.beta, vec![rat_int(1), rat_int(0)]);
        assert_eq!(f.fused_row, vec![rat_int(1), rat_int(0)]);
        assert_eq!(f.kept, vec![0]);
    }

    #[test]
    fn fuse_spans_more_than_it_keeps() {
        let r = rows(&[
            &[rat_int(1), rat_int(0), rat_int(0)],
            &[rat(1, 2), rat(1, 2), rat_int(0)],
            &[rat_int(0), rat_int(0), rat_int(1)],
        ]);
        let refs: Vec<&[Rat]> = r.iter().map(|x| x.as_slice()).collect();
        let f = fuse(&refs, &w_ones(3)).unwrap();
        assert_eq!(
            f.fused_row,
            vec![rat(1, 3), rat(1, 3), rat(1, 3)]
        );
    }

    #[test]
    fn fuse_contract_violations() {
        let empty: Vec<&[Rat]> = vec![];
        assert!(matches!(
            fuse(&empty, &w_ones(2)),
            Err(EstimationError::NoInformation)
        ));
        let bad = rows(&[&[rat(1, 2), rat(1, 4)]]);
        let refs: Vec<&[Rat]> = bad.iter().map(|x| x.as_slice()).collect();
        assert!(matches!(
            fuse(&refs, &w_ones(2)),
            Err(EstimationError::NonUnitRowSum { index: 1, .. })
        ));
        let short = rows(&[&[rat_int(1)]]);
        let refs: Vec<&[Rat]> = short.iter().map(|x| x.as_slice()).collect();
        assert!(matches!(
            fuse(&refs, &w_ones(2)),
            Err(EstimationError::RowLength { .. })
        ));
    }

    #[test]
    fn propagate_overlap_pair() {
        let p = propagate(&overlap_pair(), &w_ones(3)).unwrap();
        assert_eq!(p.profiles.len(), 2);
        let second = &p.profiles[1];
        assert_eq!(
            second.rows.row(0),
            &[rat(1, 2), rat(1, 2), rat_int(0)][..]
        );
        assert_eq!(
            second.rows.row(1),
            &[rat_int(0), rat(1, 2), rat(1, 2)][..]
        );
        let omega = &p.covariances[1].entries;
        assert_eq!(omega.get(0, 0), &rat(1, 2));
        assert_eq!(omega.get(1, 1), &rat(1, 2));
        assert_eq!(omega.get(0, 1), &rat(1, 4));
        assert!(omega.is_symmetric());
    }

    #[test]
    fn propagate_shared_cycle() {
        let p = propagate(&shared_cycle(), &w_ones(3)).unwrap();
        let omega = &p.covariances[1].entries;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { rat(1, 2) } else { rat(1, 4) };
                assert_eq!(omega.get(i, j), &want, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn propagate_chain_of_single_agents() {
        let net = network_from_rows(vec![1, 1, 1], &[vec![vec![1]], vec![vec![1]]]).unwrap();
        let w = PrecisionVector::new(vec![rat(7, 3)]).unwrap();
        let p = propagate(&net, &w).unwrap();
        for profile in &p.profiles {
            assert_eq!(profile.rows.row(0), &[rat_int(1)][..]);
            assert_eq!(profile.valid, vec![true]);
        }
    }

    #[test]
    fn invalid_agents_cascade() {
        // Layer-2 agent 2 hears nobody; layer-3 agent 2 hears only that ghost.
        let net = network_from_rows(
            vec![2, 2, 2],
            &[
                vec![vec![1, 1], vec![0, 0]],
                vec![vec![1, 0], vec![0, 1]],
            ],
        )
        .unwrap();
        let p = propagate(&net, &w_ones(2)).unwrap();
        assert_eq!(p.profiles[1].valid, vec![true, false]);
        assert_eq!(p.profiles[2].valid, vec![true, false]);
        assert_eq!(
            p.profiles[2].rows.row(1),
            &[rat_int(0), rat_int(0)][..]
        );
        // The invalid agent contributes nothing to the covariance.
        assert_eq!(p.covariances[2].entries.get(1, 1), &rat_int(0));
        let fe = final_estimate(&net, &w_ones(2)).unwrap();
        assert_eq!(fe.alpha, vec![rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn final_estimate_goldens() {
        let fe = final_estimate(&overlap_pair(), &w_ones(3)).unwrap();
        assert_eq!(fe.alpha, vec![rat(1, 4), rat(1, 2), rat(1, 4)]);
        assert_eq!(fe.variance, rat(3, 8));
        assert_eq!(fe.ideal_variance, rat(1, 3));

        let fe = final_estimate(&shared_cycle(), &w_ones(3)).unwrap();
        assert_eq!(fe.alpha, vec![rat(1, 3), rat(1, 3), rat(1, 3)]);
        assert_eq!(fe.variance, rat(1, 3));
        assert_eq!(fe.ideal_variance, rat(1, 3));
    }

    #[test]
    fn no_information_network() {
        let net = network_from_rows(vec![2, 1], &[vec![vec![0, 0]]]).unwrap();
        assert!(matches!(
            final_estimate(&net, &w_ones(2)),
            Err(EstimationError::NoInformation)
        ));
    }

    #[test]
    fn bias_examples() {
        let alpha = vec![rat(1, 4), rat(1, 2), rat(1, 4)];
        let b = vec![rat_int(0), rat_int(1), rat_int(0)];
        assert_eq!(final_bias(&alpha, &b).unwrap(), rat(1, 2));
        let zero = vec![rat_int(0); 3];
        assert_eq!(final_bias(&alpha, &zero).unwrap(), rat_int(0));
        assert!(final_bias(&alpha, &zero[..2]).is_err());
    }

    #[test]
    fn simulate_is_deterministic_and_calibrated() {
        let net = overlap_pair();
        let w = w_ones(3);
        let a = simulate(&net, &w, 0.0, None, 20_000, 99).unwrap();
        let b = simulate(&net, &w, 0.0, None, 20_000, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.generator, "chacha8-splitmix64");
        assert!((a.variance - 0.375).abs() <= 3.0 * a.variance_se);
        assert!(a.mean.abs() < 0.05);

        let c = simulate(&net, &w, 0.0, None, 20_000, 100).unwrap();
        assert_ne!(a.variance, c.variance);
    }

    #[test]
    fn simulate_edge_cases() {
        let net = network_from_rows(vec![1, 1], &[vec![vec![1]]]).unwrap();
        let w = PrecisionVector::new(vec![rat_int(1)]).unwrap();
        let s = simulate(&net, &w, 5.0, None, 40_000, 7).unwrap();
        assert!((s.mean - 5.0).abs() < 3.0 / (40_000f64).sqrt());

        let huge = PrecisionVector::new(vec![rat_int(1_000_000_000)]).unwrap();
        let s = simulate(&net, &huge, 5.0, None, 1_000, 7).unwrap();
        assert!(s.variance < 1e-7);

        assert!(matches!(
            simulate(&net, &w, 0.0, None, 1, 7),
            Err(EstimationError::TooFewTrials { .. })
        ));
        assert!(matches!(
            simulate(&net, &w, 0.0, Some(&[0.0, 0.0]), 10, 7),
            Err(EstimationError::BiasLength { .. })
        ));
    }

    #[test]
    fn simulate_applies_biases() {
        let net = overlap_pair();
        let w = w_ones(3);
        let s = simulate(&net, &w, 1.0, Some(&[0.0, 1.0, 0.0]), 20_000, 3).unwrap();
        // Middle measurement biased by 1 and alpha_2 = 1/2: mean near 1.5.
        assert!((s.mean - 1.5).abs() < 0.05);
    }
}
