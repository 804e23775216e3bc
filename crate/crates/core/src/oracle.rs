//! Independent verification paths: a second fusion algorithm built on a
//! row-space basis, exhaustive enumeration of small networks, Monte Carlo
//! variance checks, and the bundled check suites behind `verify`.
//!
//! Everything here deliberately re-derives results through different
//! algebra than the production code so that agreement means something.

use crate::analysis::{
    equal_outdegree_components, has_w_motif, is_ideal, is_ideal_three_layer, naive_weights,
    reduce, ring_network, ring_variance, AnalysisError,
};
use crate::estimation::{
    final_bias, final_estimate, fuse, simulate, weight_profiles, EstimationError,
};
use crate::linalg::{dot_scaled, solve_square, LinalgError};
use crate::net::{BoolMat, LayeredNetwork, PrecisionVector};
use crate::rat::{format_rat, rat, rat_to_f64, Rat};
use crate::seeding::derive_seed;
use crate::ensemble;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration needs {found} edge slots; the guard allows at most {max}")]
    TooManyEdgeSlots { found: usize, max: usize },
    #[error("layer sizes in an enumeration must be at least 1")]
    BadEnumerationSizes,
    #[error("max-variance enumeration is defined for three-layer specs (no third layer)")]
    UnsupportedDepth,
    #[error("a Monte Carlo check needs at least {min} trials, got {found}")]
    TooFewTrials { min: u64, found: u64 },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Hard cap on exhaustive enumeration: 2^24 matrices is the most a desk-scale
/// check is allowed to walk.
pub const MAX_EDGE_SLOTS: usize = 24;

/// Which small-network family to enumerate exhaustively.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationSpec {
    pub l1: usize,
    pub l2: usize,
    /// Present for 4-layer enumeration.
    pub l3: Option<usize>,
    /// Admissibility filter for max-variance search: every first-layer agent
    /// must have at least one connection.
    pub require_full_columns: bool,
}

impl EnumerationSpec {
    pub fn three_layer(l1: usize, l2: usize, require_full_columns: bool) -> Self {
        EnumerationSpec {
            l1,
            l2,
            l3: None,
            require_full_columns,
        }
    }

    pub fn four_layer(l1: usize, l2: usize, l3: usize) -> Self {
        EnumerationSpec {
            l1,
            l2,
            l3: Some(l3),
            require_full_columns: false,
        }
    }

    pub fn edge_slots(&self) -> usize {
        self.l1 * self.l2 + self.l3.map_or(0, |l3| self.l2 * l3)
    }

    fn check(&self) -> Result<(), OracleError> {
        if self.l1 == 0 || self.l2 == 0 || self.l3 == Some(0) {
            return Err(OracleError::BadEnumerationSizes);
        }
        let slots = self.edge_slots();
        if slots > MAX_EDGE_SLOTS {
            return Err(OracleError::TooManyEdgeSlots {
                found: slots,
                max: MAX_EDGE_SLOTS,
            });
        }
        Ok(())
    }
}

/// Minimum-variance sum-one combination over the providers' row span,
/// computed from a reduced basis and explicit normal equations rather than
/// from inverse-covariance weights. Must equal fuse().fused_row exactly.
///
/// Derivation: with basis B (full row rank), a = t^T B, the variance
/// t^T (B diag(1/w) B^T) t is minimized under the constraint t^T (B 1) = 1 by
/// t = G^{-1} d / (d^T G^{-1} d) with G = B diag(1/w) B^T and d = B 1.
pub fn oracle_fuse(
    provider_rows: &[&[Rat]],
    precisions: &PrecisionVector,
) -> Result<Vec<Rat>, EstimationError> {
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

    // Reduced row echelon basis of the span, built in place.
    let mut basis: Vec<Vec<Rat>> = Vec::new();
    let mut pivot_cols: Vec<usize> = Vec::new();
    for row in provider_rows {
        let mut v = row.to_vec();
        for (b, &pc) in basis.iter().zip(&pivot_cols) {
            let c = v[pc].clone();
            if c.is_zero() {
                continue;
            }
            for (x, y) in v.iter_mut().zip(b) {
                if !y.is_zero() {
                    *x -= &c * y;
                }
            }
        }
        let Some(lead) = v.iter().position(|x| !x.is_zero()) else {
            continue;
        };
        let scale = v[lead].clone();
        for x in v.iter_mut() {
            if !x.is_zero() {
                *x /= &scale;
            }
        }
        for (b, &pc) in basis.iter_mut().zip(&pivot_cols) {
            debug_assert_ne!(pc, lead);
            let c = b[lead].clone();
            if c.is_zero() {
                continue;
            }
            for (x, y) in b.iter_mut().zip(&v) {
                if !y.is_zero() {
                    *x -= &c * y;
                }
            }
        }
        basis.push(v);
        pivot_cols.push(lead);
    }
    if basis.is_empty() {
        return Err(EstimationError::NoInformation);
    }

    let r = basis.len();
    let inv_w = precisions.inverses();
    let d: Vec<Rat> = basis
        .iter()
        .map(|b| b.iter().fold(Rat::zero(), |acc, v| acc + v))
        .collect();
    let mut g = crate::linalg::RatMatrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let v = dot_scaled(&basis[i], &basis[j], &inv_w);
            g.set(i, j, v.clone());
            g.set(j, i, v);
        }
    }
    let u = solve_square(&g, &d)?;
    let mut denom = Rat::zero();
    for (di, ui) in d.iter().zip(&u) {
        denom += di * ui;
    }
    if denom.is_zero() {
        return Err(EstimationError::Linalg(LinalgError::Singular));
    }
    let mut fused = vec![Rat::zero(); n];
    for (ui, b) in u.iter().zip(&basis) {
        let t = ui / &denom;
        if t.is_zero() {
            continue;
        }
        for (acc, v) in fused.iter_mut().zip(b) {
            if !v.is_zero() {
                *acc += &t * v;
            }
        }
    }
    Ok(fused)
}

fn decode_rows(x: u64, n_rows: usize, n_cols: usize) -> Vec<u32> {
    let row_mask = (1u64 << n_cols) - 1;
    (0..n_rows)
        .map(|i| ((x >> (i * n_cols)) & row_mask) as u32)
        .collect()
}

fn masks_to_mat(rows: &[u32], n_cols: usize) -> BoolMat {
    let mut m = BoolMat::zeros(rows.len(), n_cols);
    for (i, &mask) in rows.iter().enumerate() {
        for j in 0..n_cols {
            if mask & (1 << j) != 0 {
                m.set(i, j, true);
            }
        }
    }
    m
}

fn canonical_key(rows: &[u32], n_cols: usize) -> u64 {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &v)| acc | ((v as u64) << (i * n_cols)))
}

/// Normalized weight rows for the nonzero rows of a connectivity mask list.
fn normalized_rows(rows: &[u32], n_cols: usize) -> Vec<Vec<Rat>> {
    rows.iter()
        .filter(|&&v| v != 0)
        .map(|&v| {
            let d = v.count_ones() as i64;
            (0..n_cols)
                .map(|j| {
                    if v & (1 << j) != 0 {
                        rat(1, d)
                    } else {
                        Rat::zero()
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MaxVarianceOutcome {
    /// Number of matrices passing the admissibility filter, counted over raw
    /// (ordered-row) matrices.
    pub admissible: u64,
    pub max_variance: Rat,
    /// Every admissible matrix attaining the maximum, in raw form, ascending
    /// encoding order.
    pub maximizers: Vec<LayeredNetwork>,
    /// Distinct row-multisets where the two fusion routes disagreed. Zero
    /// unless something is broken.
    pub oracle_mismatches: u64,
}

/// Walks every three-layer connectivity matrix of the given shape and finds
/// the largest final-estimate variance at unit precisions, together with all
/// matrices attaining it. Row order never affects the variance, so the search
/// memoizes on sorted rows and reports maximizers in raw form.
pub fn enumerate_max_variance(spec: &EnumerationSpec) -> Result<MaxVarianceOutcome, OracleError> {
    spec.check()?;
    if spec.l3.is_some() {
        return Err(OracleError::UnsupportedDepth);
    }
    let (l1, l2) = (spec.l1, spec.l2);
    let total: u64 = 1u64 << (l1 * l2);
    let full_mask = (1u64 << l1) - 1;
    let admissible = |rows: &[u32]| {
        !spec.require_full_columns
            || rows.iter().fold(0u64, |acc, &v| acc | v as u64) == full_mask
    };

    let (admissible_count, canon_keys) = (0..total)
        .into_par_iter()
        .fold(
            || (0u64, HashSet::<u64>::new()),
            |(mut count, mut keys), x| {
                let rows = decode_rows(x, l2, l1);
                if admissible(&rows) {
                    count += 1;
                    keys.insert(canonical_key(&rows, l1));
                }
                (count, keys)
            },
        )
        .reduce(
            || (0u64, HashSet::new()),
            |(c1, mut k1), (c2, k2)| {
                k1.extend(k2);
                (c1 + c2, k1)
            },
        );

    let w = PrecisionVector::ones(l1);
    let inv_w = w.inverses();
    let evaluated: Vec<(u64, Option<Rat>, bool)> = canon_keys
        .into_par_iter()
        .map(|key| {
            let rows = decode_rows(key, l2, l1);
            let normalized = normalized_rows(&rows, l1);
            if normalized.is_empty() {
                return (key, None, true);
            }
            let refs: Vec<&[Rat]> = normalized.iter().map(|r| r.as_slice()).collect();
            let fused = fuse(&refs, &w).expect("rows sum to one by construction");
            let variance = dot_scaled(&fused.fused_row, &fused.fused_row, &inv_w);
            let agreed = oracle_fuse(&refs, &w)
                .map(|alt| alt == fused.fused_row)
                .unwrap_or(false);
            (key, Some(variance), agreed)
        })
        .collect();
    let oracle_mismatches = evaluated.iter().filter(|(_, _, ok)| !ok).count() as u64;
    let variance_of: HashMap<u64, Option<Rat>> = evaluated
        .into_iter()
        .map(|(key, var, _)| (key, var))
        .collect();
    let max_variance = variance_of
        .values()
        .flatten()
        .max()
        .cloned()
        .expect("at least one live matrix exists at any positive sizes");

    let mut maximizer_codes: Vec<u64> = (0..total)
        .into_par_iter()
        .filter(|&x| {
            let rows = decode_rows(x, l2, l1);
            admissible(&rows)
                && variance_of[&canonical_key(&rows, l1)].as_ref() == Some(&max_variance)
        })
        .collect();
    maximizer_codes.sort_unstable();
    let maximizers = maximizer_codes
        .into_iter()
        .map(|x| {
            let rows = decode_rows(x, l2, l1);
            LayeredNetwork::new(vec![l1, l2], vec![masks_to_mat(&rows, l1)])
                .expect("shape is consistent by construction")
        })
        .collect();

    Ok(MaxVarianceOutcome {
        admissible: admissible_count,
        max_variance,
        maximizers,
        oracle_mismatches,
    })
}

#[derive(Clone, Debug)]
pub struct Theorem3Outcome {
    /// Networks enumerated after the no-isolated-agents filter.
    pub total: u64,
    pub non_ideal: u64,
    /// Non-ideal networks without any W-motif. The whole point is that this
    /// stays empty.
    pub counterexamples: Vec<LayeredNetwork>,
    /// Agent fusions where the two routes disagreed; zero unless broken.
    pub oracle_mismatches: u64,
}

/// Compares every agent's production fusion against the oracle's minimizer.
/// Returns the number of disagreements.
pub fn count_fusion_mismatches(net: &LayeredNetwork, w: &PrecisionVector) -> u64 {
    let profiles = match weight_profiles(net, w) {
        Ok(p) => p,
        Err(_) => return 0,
    };
    let mut mismatches = 0;
    for layer in 2..=net.layer_count() {
        let conn = net.connectivity(layer - 1);
        let prev = &profiles[layer - 2];
        for agent in 0..net.layer_size(layer) {
            let providers: Vec<&[Rat]> = conn
                .row_support(agent)
                .into_iter()
                .filter(|&j| prev.valid[j])
                .map(|j| prev.rows.row(j))
                .collect();
            if providers.is_empty() {
                continue;
            }
            let via_fuse = fuse(&providers, w).map(|f| f.fused_row);
            let via_oracle = oracle_fuse(&providers, w);
            match (via_fuse, via_oracle) {
                (Ok(a), Ok(b)) if a == b => {}
                _ => mismatches += 1,
            }
        }
    }
    let last = profiles.last().expect("at least one layer");
    let finals: Vec<&[Rat]> = last.valid_rows().into_iter().map(|(_, r)| r).collect();
    if !finals.is_empty() {
        let via_fuse = fuse(&finals, w).map(|f| f.fused_row);
        let via_oracle = oracle_fuse(&finals, w);
        match (via_fuse, via_oracle) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => mismatches += 1,
        }
    }
    mismatches
}

/// Exhaustively checks "no W-motif implies ideal" over all networks of the
/// given shape in which every agent communicates (no isolated agents).
/// Four-layer shapes enumerate both connectivity matrices jointly.
pub fn enumerate_theorem3(spec: &EnumerationSpec) -> Result<Theorem3Outcome, OracleError> {
    spec.check()?;
    let (l1, l2) = (spec.l1, spec.l2);
    let slots1 = l1 * l2;
    let total_codes: u64 = 1u64 << spec.edge_slots();

    let per_code = |x: u64| -> Option<(bool, bool, u64, Option<LayeredNetwork>)> {
        let c1_rows = decode_rows(x & ((1u64 << slots1) - 1), l2, l1);
        let mut matrices = vec![masks_to_mat(&c1_rows, l1)];
        let mut sizes = vec![l1, l2];
        if let Some(l3) = spec.l3 {
            let c2_rows = decode_rows(x >> slots1, l3, l2);
            matrices.push(masks_to_mat(&c2_rows, l2));
            sizes.push(l3);
        }
        let net = LayeredNetwork::new(sizes, matrices).expect("shapes consistent");
        if !net.validate().ok {
            return None;
        }
        let w = PrecisionVector::ones(l1);
        let ideal = is_ideal(&net, &w).expect("valid network").ideal;
        let motif_free = has_w_motif(&net).is_none();
        let mismatches = count_fusion_mismatches(&net, &w);
        let counterexample = (!ideal && motif_free).then(|| net.clone());
        Some((ideal, motif_free, mismatches, counterexample))
    };

    let (total, non_ideal, oracle_mismatches, mut counterexamples) = (0..total_codes)
        .into_par_iter()
        .fold(
            || (0u64, 0u64, 0u64, Vec::new()),
            |(mut t, mut ni, mut mm, mut cex), x| {
                if let Some((ideal, _motif_free, mismatches, counterexample)) = per_code(x) {
                    t += 1;
                    if !ideal {
                        ni += 1;
                    }
                    mm += mismatches;
                    if let Some(net) = counterexample {
                        cex.push(net);
                    }
                }
                (t, ni, mm, cex)
            },
        )
        .reduce(
            || (0u64, 0u64, 0u64, Vec::new()),
            |(t1, n1, m1, mut c1), (t2, n2, m2, c2)| {
                c1.extend(c2);
                (t1 + t2, n1 + n2, m1 + m2, c1)
            },
        );
    counterexamples.sort_by_key(|net| {
        net.connectivity_matrices()
            .iter()
            .map(BoolMat::to_binary_rows)
            .collect::<Vec<_>>()
    });

    Ok(Theorem3Outcome {
        total,
        non_ideal,
        counterexamples,
        oracle_mismatches,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McOutcome {
    pub empirical: f64,
    pub analytic: f64,
    pub se: f64,
    pub pass: bool,
    pub trials: u64,
    pub seed: u64,
}

/// Simulates the network and asks whether the sampled variance lands within
/// three standard errors of the exact one.
pub fn mc_variance_check(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
    trials: u64,
    seed: u64,
) -> Result<McOutcome, OracleError> {
    const MIN_TRIALS: u64 = 10_000;
    if trials < MIN_TRIALS {
        return Err(OracleError::TooFewTrials {
            min: MIN_TRIALS,
            found: trials,
        });
    }
    let summary = simulate(net, precisions, 0.0, None, trials, seed)?;
    let analytic = rat_to_f64(&final_estimate(net, precisions)?.variance);
    let pass = (summary.variance - analytic).abs() <= 3.0 * summary.variance_se;
    Ok(McOutcome {
        empirical: summary.variance,
        analytic,
        se: summary.variance_se,
        pass,
        trials,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: u64,
    pub pass: bool,
    /// Informational checks report observations without failing the suite.
    pub informational: bool,
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub level: String,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

struct Check {
    result: CheckResult,
}

impl Check {
    fn new(name: &str) -> Self {
        Check {
            result: CheckResult {
                name: name.to_owned(),
                instances: 0,
                pass: true,
                informational: false,
                first_failure: None,
            },
        }
    }

    fn informational(name: &str) -> Self {
        let mut c = Self::new(name);
        c.result.informational = true;
        c
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.result.instances += 1;
        if !ok {
            self.result.pass = false;
            if self.result.first_failure.is_none() {
                self.result.first_failure = Some(detail());
            }
        }
    }

    fn finish(self) -> CheckResult {
        self.result
    }
}

/// Fixed base seed for the randomized verification instances, so `verify`
/// checks the same cases every run.
pub const VERIFICATION_SEED: u64 = 0x0f0e_1d2c_3b4a_5968;

fn overlap_pair_net() -> LayeredNetwork {
    crate::net::network_from_rows(vec![3, 2], &[vec![vec![1, 1, 0], vec![0, 1, 1]]])
        .expect("static fixture")
}

fn shared_cycle_net() -> LayeredNetwork {
    crate::net::network_from_rows(
        vec![3, 3],
        &[vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]],
    )
    .expect("static fixture")
}

fn random_precisions(rng: &mut ChaCha8Rng, n: usize) -> PrecisionVector {
    let values = (0..n)
        .map(|_| rat(rng.gen_range(1..=12), rng.gen_range(1..=12)))
        .collect();
    PrecisionVector::new(values).expect("positive by construction")
}

fn check_golden_overlap(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("golden-overlap-pair");
    let net = overlap_pair_net();
    let w = PrecisionVector::ones(3);
    match final_estimate(&net, &w) {
        Ok(fe) => {
            c.record(fe.alpha == vec![rat(1, 4), rat(1, 2), rat(1, 4)], || {
                format!("alpha was {:?}", fe.alpha.iter().map(format_rat).collect::<Vec<_>>())
            });
            c.record(fe.variance == rat(3, 8), || {
                format!("variance was {}", format_rat(&fe.variance))
            });
            c.record(fe.ideal_variance == rat(1, 3), || {
                format!("ideal variance was {}", format_rat(&fe.ideal_variance))
            });
        }
        Err(e) => c.record(false, || format!("final_estimate failed: {e}")),
    }
    let verdict = is_ideal(&net, &w).expect("valid network");
    c.record(!verdict.ideal && verdict.certificate.is_none(), || {
        "expected non-ideal without certificate".to_owned()
    });
    c.record(
        !is_ideal_three_layer(&net).expect("two explicit layers"),
        || "three-layer test claimed ideal".to_owned(),
    );
    match has_w_motif(&net) {
        Some(wit) => c.record(
            wit.to_layer == 2 && wit.agents == (1, 2) && wit.sources == (1, 2, 3),
            || format!("witness was {wit:?}"),
        ),
        None => c.record(false, || "no W-motif found".to_owned()),
    }
    match (naive_weights(&net), final_estimate(&net, &w)) {
        (Ok(naive), Ok(fe)) => c.record(naive == fe.alpha, || {
            "naive weights should match final alpha here".to_owned()
        }),
        _ => c.record(false, || "naive weight computation failed".to_owned()),
    }
    checks.push(c.finish());
}

fn check_golden_cycle(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("golden-shared-cycle");
    let net = shared_cycle_net();
    let w = PrecisionVector::ones(3);
    match final_estimate(&net, &w) {
        Ok(fe) => {
            c.record(fe.alpha == vec![rat(1, 3), rat(1, 3), rat(1, 3)], || {
                "alpha should be uniform thirds".to_owned()
            });
            c.record(fe.variance == rat(1, 3) && fe.variance == fe.ideal_variance, || {
                format!("variance was {}", format_rat(&fe.variance))
            });
        }
        Err(e) => c.record(false, || format!("final_estimate failed: {e}")),
    }
    let verdict = is_ideal(&net, &w).expect("valid network");
    match &verdict.certificate {
        Some(cert) if verdict.ideal => {
            let profiles = weight_profiles(&net, &w).expect("valid network");
            let last = profiles.last().unwrap();
            let mut rebuilt = vec![Rat::zero(); 3];
            for (i, coeff) in cert.iter().enumerate() {
                for (acc, v) in rebuilt.iter_mut().zip(last.rows.row(i)) {
                    *acc += coeff * v;
                }
            }
            c.record(rebuilt == w.values(), || {
                "certificate does not rebuild the precision vector".to_owned()
            });
        }
        _ => c.record(false, || "expected ideal with certificate".to_owned()),
    }
    c.record(
        is_ideal_three_layer(&net).expect("two explicit layers"),
        || "three-layer test claimed non-ideal".to_owned(),
    );
    c.record(has_w_motif(&net).is_some(), || {
        "this network contains motifs yet is ideal; none found".to_owned()
    });
    c.record(
        equal_outdegree_components(&net).expect("two explicit layers"),
        || "equal out-degree condition should hold".to_owned(),
    );
    checks.push(c.finish());
}

fn check_ring_goldens(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("ring-family-goldens");
    for n in [1usize, 2, 3, 4, 10, 100] {
        let net = ring_network(n).expect("n >= 1");
        let w = PrecisionVector::ones(n + 1);
        let fe = final_estimate(&net, &w).expect("ring is live");
        let formula = ring_variance(n).expect("n >= 1");
        c.record(fe.variance == formula, || {
            format!("ring {n}: variance {} != formula {}", format_rat(&fe.variance), format_rat(&formula))
        });
        let mut expected = vec![rat(1, 2)];
        expected.extend(std::iter::repeat_n(rat(1, 2 * n as i64), n));
        c.record(fe.alpha == expected, || format!("ring {n}: unexpected alpha"));
        let naive = naive_weights(&net).expect("full columns");
        c.record(naive == fe.alpha, || {
            format!("ring {n}: naive weights should equal final alpha")
        });
        let mut biases = vec![Rat::zero(); n + 1];
        biases[0] = Rat::one();
        let bias = final_bias(&fe.alpha, &biases).expect("lengths match");
        c.record(bias == rat(1, 2), || {
            format!("ring {n}: hub bias {} != 1/2", format_rat(&bias))
        });
    }
    checks.push(c.finish());
}

fn random_sizes(rng: &mut ChaCha8Rng, layers: usize) -> Vec<usize> {
    (0..layers).map(|_| rng.gen_range(1..=6)).collect()
}

fn check_fusion_routes_random(checks: &mut Vec<CheckResult>, nets: u64) {
    let mut c = Check::new("fusion-routes-agree-random");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(VERIFICATION_SEED, &[1]));
    for k in 0..nets {
        let layers = if k % 3 == 2 { 3 } else { 2 };
        let sizes = random_sizes(&mut rng, layers);
        let p = rng.gen_range(0.2..=1.0);
        let seed = rng.gen::<u64>();
        let net = ensemble::random_network(&sizes, p, seed).expect("valid parameters");
        let w = random_precisions(&mut rng, sizes[0]);
        let mismatches = count_fusion_mismatches(&net, &w);
        c.record(mismatches == 0, || {
            format!("net #{k} (sizes {sizes:?}, seed {seed}): {mismatches} disagreements")
        });
    }
    checks.push(c.finish());
}

fn check_three_layer_agreement_random(checks: &mut Vec<CheckResult>, nets: u64) {
    let mut c = Check::new("rank-test-agreement-random");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(VERIFICATION_SEED, &[2]));
    for k in 0..nets {
        let sizes = random_sizes(&mut rng, 2);
        let p = rng.gen_range(0.2..=1.0);
        let seed = rng.gen::<u64>();
        let net = ensemble::random_network(&sizes, p, seed).expect("valid parameters");
        let w = random_precisions(&mut rng, sizes[0]);
        let general = is_ideal(&net, &w).expect("valid network").ideal;
        let quick = is_ideal_three_layer(&net).expect("two explicit layers");
        c.record(general == quick, || {
            format!("net #{k} (sizes {sizes:?}, seed {seed}): general {general}, three-layer {quick}")
        });
    }
    checks.push(c.finish());
}

fn check_reduction_random(checks: &mut Vec<CheckResult>, nets: u64) {
    let mut c = Check::new("reduction-preserves-estimate-random");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(VERIFICATION_SEED, &[3]));
    for k in 0..nets {
        let sizes = random_sizes(&mut rng, 2);
        let p = rng.gen_range(0.2..=1.0);
        let seed = rng.gen::<u64>();
        let net = ensemble::random_network(&sizes, p, seed).expect("valid parameters");
        let w = random_precisions(&mut rng, sizes[0]);
        let reduced = reduce(&net).expect("two explicit layers");
        c.record(reduced.edge_count() <= net.edge_count(), || {
            format!("net #{k}: reduction added edges")
        });
        // No nonempty input set may contain another agent's nonempty set.
        let cm = reduced.connectivity(1);
        let mut contained = false;
        for i in 0..cm.rows() {
            if cm.row_sum(i) == 0 {
                continue;
            }
            for j in 0..cm.rows() {
                if i != j && (0..cm.cols()).all(|col| !cm.get(i, col) || cm.get(j, col)) {
                    contained = true;
                }
            }
        }
        c.record(!contained, || format!("net #{k}: output is not fully reduced"));
        match (final_estimate(&net, &w), final_estimate(&reduced, &w)) {
            (Ok(a), Ok(b)) => c.record(a.alpha == b.alpha && a.variance == b.variance, || {
                format!("net #{k} (sizes {sizes:?}, seed {seed}): estimate changed")
            }),
            (Err(EstimationError::NoInformation), Err(EstimationError::NoInformation)) => {
                c.record(true, String::new)
            }
            _ => c.record(false, || format!("net #{k}: liveness changed under reduction")),
        }
    }
    checks.push(c.finish());
}

fn check_full_connectivity(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("complete-stacks-ideal");
    for sizes in [vec![1, 1], vec![3, 2], vec![5, 3], vec![4, 4, 4]] {
        let net = ensemble::random_network(&sizes, 1.0, 0).expect("valid parameters");
        let verdict = is_ideal(&net, &PrecisionVector::ones(sizes[0])).expect("valid network");
        c.record(verdict.ideal, || format!("complete stack {sizes:?} not ideal"));
    }
    checks.push(c.finish());
}

fn check_nonnegativity_scan(checks: &mut Vec<CheckResult>, nets: u64) {
    // The production code never assumes final weights are nonnegative; this
    // scan reports what random topologies actually do.
    let mut c = Check::informational("final-weight-nonnegativity-scan");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(VERIFICATION_SEED, &[4]));
    for k in 0..nets {
        let layers = if k % 2 == 0 { 2 } else { 3 };
        let sizes = random_sizes(&mut rng, layers);
        let p = rng.gen_range(0.2..=1.0);
        let seed = rng.gen::<u64>();
        let net = ensemble::random_network(&sizes, p, seed).expect("valid parameters");
        let w = random_precisions(&mut rng, sizes[0]);
        if let Ok(fe) = final_estimate(&net, &w) {
            let negative = fe.alpha.iter().any(|a| a < &Rat::zero());
            c.record(!negative, || {
                format!(
                    "net #{k} (sizes {sizes:?}, seed {seed}) has a negative final weight: {:?}",
                    fe.alpha.iter().map(format_rat).collect::<Vec<_>>()
                )
            });
        }
    }
    // Observations only: never fail the suite.
    let mut result = c.finish();
    if !result.pass {
        result.first_failure = result
            .first_failure
            .map(|d| format!("observed (not a failure): {d}"));
        result.pass = true;
    }
    checks.push(result);
}

/// True when the network is a relabeling of ring_network(n): one hub column
/// shared by all rows, one distinct private column per row.
pub fn is_ring_relabeling(net: &LayeredNetwork) -> bool {
    if net.layer_count() != 2 {
        return false;
    }
    let c = net.connectivity(1);
    let (n, l1) = (c.rows(), c.cols());
    if l1 != n + 1 || n == 0 {
        return false;
    }
    let mut hub = None;
    for j in 0..l1 {
        if (0..n).all(|i| c.get(i, j)) {
            if hub.is_some() {
                return false;
            }
            hub = Some(j);
        }
    }
    let Some(hub) = hub else {
        return false;
    };
    let mut seen = vec![false; l1];
    for i in 0..n {
        if c.row_sum(i) != 2 {
            return false;
        }
        let Some(private) = (0..l1).find(|&j| j != hub && c.get(i, j)) else {
            return false;
        };
        if seen[private] {
            return false;
        }
        seen[private] = true;
    }
    true
}

/// Distinct nonzero rows of a three-layer network's connectivity, as a new
/// network (used to look at maximizers modulo redundant agents).
pub fn distinct_row_core(net: &LayeredNetwork) -> Option<LayeredNetwork> {
    if net.layer_count() != 2 {
        return None;
    }
    let c = net.connectivity(1);
    let mut rows: Vec<Vec<u8>> = (0..c.rows())
        .map(|i| {
            (0..c.cols())
                .map(|j| u8::from(c.get(i, j)))
                .collect::<Vec<u8>>()
        })
        .filter(|r| r.iter().any(|&v| v != 0))
        .collect();
    rows.sort();
    rows.dedup();
    if rows.is_empty() {
        return None;
    }
    let sizes = vec![c.cols(), rows.len()];
    crate::net::network_from_rows(sizes, &[rows]).ok()
}

fn check_theorem3_exhaustive(checks: &mut Vec<CheckResult>) {
    let mut c3 = Check::new("no-motif-implies-ideal-3layer");
    let mut total3 = 0u64;
    for l1 in 1..=4 {
        for l2 in 1..=3 {
            match enumerate_theorem3(&EnumerationSpec::three_layer(l1, l2, false)) {
                Ok(out) => {
                    total3 += out.total;
                    c3.record(out.counterexamples.is_empty(), || {
                        format!("({l1},{l2}): {} counterexamples", out.counterexamples.len())
                    });
                    c3.record(out.oracle_mismatches == 0, || {
                        format!("({l1},{l2}): {} fusion disagreements", out.oracle_mismatches)
                    });
                }
                Err(e) => c3.record(false, || format!("({l1},{l2}): {e}")),
            }
        }
    }
    c3.record(total3 == 2568, || {
        format!("expected 2568 fully-communicating three-layer networks, saw {total3}")
    });
    checks.push(c3.finish());

    let mut c4 = Check::new("no-motif-implies-ideal-4layer");
    let mut total4 = 0u64;
    let mut non_ideal4 = 0u64;
    for l1 in 1..=3 {
        for l2 in 1..=3 {
            for l3 in 1..=3 {
                match enumerate_theorem3(&EnumerationSpec::four_layer(l1, l2, l3)) {
                    Ok(out) => {
                        total4 += out.total;
                        non_ideal4 += out.non_ideal;
                        c4.record(out.counterexamples.is_empty(), || {
                            format!(
                                "({l1},{l2},{l3}): {} counterexamples",
                                out.counterexamples.len()
                            )
                        });
                        c4.record(out.oracle_mismatches == 0, || {
                            format!(
                                "({l1},{l2},{l3}): {} fusion disagreements",
                                out.oracle_mismatches
                            )
                        });
                    }
                    Err(e) => c4.record(false, || format!("({l1},{l2},{l3}): {e}")),
                }
            }
        }
    }
    c4.record(total4 == 85779, || {
        format!("expected 85779 fully-communicating four-layer networks, saw {total4}")
    });
    c4.record(non_ideal4 == 9720, || {
        format!("expected 9720 non-ideal four-layer networks, saw {non_ideal4}")
    });
    checks.push(c4.finish());
}

fn check_rank_test_exhaustive(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("rank-test-agreement-exhaustive");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(VERIFICATION_SEED, &[5]));
    for l1 in 1..=4usize {
        for l2 in 1..=3usize {
            for code in 0..(1u64 << (l1 * l2)) {
                let rows = decode_rows(code, l2, l1);
                let net =
                    LayeredNetwork::new(vec![l1, l2], vec![masks_to_mat(&rows, l1)])
                        .expect("shape consistent");
                let quick = is_ideal_three_layer(&net).expect("two explicit layers");
                let unit = is_ideal(&net, &PrecisionVector::ones(l1))
                    .expect("valid network")
                    .ideal;
                let w = random_precisions(&mut rng, l1);
                let weighted = is_ideal(&net, &w).expect("valid network").ideal;
                c.record(quick == unit && quick == weighted, || {
                    format!("({l1},{l2}) code {code}: quick {quick}, unit {unit}, weighted {weighted}")
                });
            }
        }
    }
    checks.push(c.finish());
}

fn check_max_variance_cells(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("max-variance-enumeration");

    match enumerate_max_variance(&EnumerationSpec::three_layer(2, 1, true)) {
        Ok(out) => {
            c.record(out.admissible == 1 && out.max_variance == rat(1, 2), || {
                format!(
                    "(2,1): admissible {}, max {}",
                    out.admissible,
                    format_rat(&out.max_variance)
                )
            });
        }
        Err(e) => c.record(false, || format!("(2,1): {e}")),
    }

    // (l1, l2, admissible, max, n_maximizers, all_pure_rings)
    let cells = [
        (4usize, 3usize, 2401u64, rat(1, 3), 24usize, true),
        (4, 4, 50625, rat(1, 3), 240, false),
        (5, 4, 759375, rat(5, 16), 120, true),
    ];
    for (l1, l2, admissible, max, n_max, pure) in cells {
        match enumerate_max_variance(&EnumerationSpec::three_layer(l1, l2, true)) {
            Ok(out) => {
                c.record(out.admissible == admissible, || {
                    format!("({l1},{l2}): admissible {} != {admissible}", out.admissible)
                });
                c.record(out.max_variance == max, || {
                    format!(
                        "({l1},{l2}): max {} != {}",
                        format_rat(&out.max_variance),
                        format_rat(&max)
                    )
                });
                c.record(out.maximizers.len() == n_max, || {
                    format!("({l1},{l2}): {} maximizers != {n_max}", out.maximizers.len())
                });
                c.record(out.oracle_mismatches == 0, || {
                    format!("({l1},{l2}): fusion disagreements")
                });
                for m in &out.maximizers {
                    if pure {
                        c.record(is_ring_relabeling(m), || {
                            format!("({l1},{l2}): maximizer is not a ring relabeling")
                        });
                    } else {
                        let core_ok = distinct_row_core(m)
                            .map(|core| is_ring_relabeling(&core))
                            .unwrap_or(false);
                        c.record(core_ok, || {
                            format!("({l1},{l2}): maximizer core is not a ring relabeling")
                        });
                    }
                }
            }
            Err(e) => c.record(false, || format!("({l1},{l2}): {e}")),
        }
    }
    checks.push(c.finish());
}

fn check_mc_variance(checks: &mut Vec<CheckResult>) {
    let mut c = Check::new("monte-carlo-variance");
    let cases: Vec<(&str, LayeredNetwork, usize)> = vec![
        ("overlap-pair", overlap_pair_net(), 3),
        ("shared-cycle", shared_cycle_net(), 3),
        ("ring-10", ring_network(10).expect("n >= 1"), 11),
        (
            "single-agent",
            crate::net::network_from_rows(vec![1, 1], &[vec![vec![1]]]).expect("static fixture"),
            1,
        ),
    ];
    for (i, (name, net, l1)) in cases.into_iter().enumerate() {
        let seed = derive_seed(VERIFICATION_SEED, &[6, i as u64]);
        match mc_variance_check(&net, &PrecisionVector::ones(l1), 100_000, seed) {
            Ok(out) => c.record(out.pass, || {
                format!(
                    "{name}: empirical {} vs analytic {} (se {})",
                    out.empirical, out.analytic, out.se
                )
            }),
            Err(e) => c.record(false, || format!("{name}: {e}")),
        }
    }
    checks.push(c.finish());
}

/// Runs the verification suites. Quick covers goldens and randomized
/// cross-checks in seconds; Full adds the exhaustive enumerations and Monte
/// Carlo checks and takes minutes.
pub fn run_verification(level: VerifyLevel) -> VerificationReport {
    let mut checks = Vec::new();
    check_golden_overlap(&mut checks);
    check_golden_cycle(&mut checks);
    check_ring_goldens(&mut checks);
    let random_nets = match level {
        VerifyLevel::Quick => 200,
        VerifyLevel::Full => 1000,
    };
    check_fusion_routes_random(&mut checks, random_nets);
    check_three_layer_agreement_random(&mut checks, random_nets);
    check_reduction_random(&mut checks, random_nets);
    check_full_connectivity(&mut checks);
    check_nonnegativity_scan(&mut checks, random_nets);
    if level == VerifyLevel::Full {
        check_theorem3_exhaustive(&mut checks);
        check_rank_test_exhaustive(&mut checks);
        check_max_variance_cells(&mut checks);
        check_mc_variance(&mut checks);
    }
    let pass = checks.iter().all(|c| c.pass || c.informational);
    VerificationReport {
        level: match level {
            VerifyLevel::Quick => "quick".to_owned(),
            VerifyLevel::Full => "full".to_owned(),
        },
        pass,
        checks,
    }
}
