//! Random network generation and ideality-probability sweeps.
//!
//! Every trial and every sweep cell derives its own ChaCha8 seed from the
//! master seed and the cell's content (layer sizes and connection
//! probability), so runs are reproducible for any thread count and adding
//! grid cells never changes the trials of existing ones.

use crate::analysis::{is_ideal, is_ideal_three_layer, AnalysisError};
use crate::net::{BoolMat, LayeredNetwork, PrecisionVector};
use crate::seeding::{derive_seed, GENERATOR_NAME};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("connection probability {0} is outside (0, 1]")]
    BadProbability(f64),
    #[error("need at least one trial")]
    NoTrials,
    #[error("layer sizes must be nonempty and positive, got {0:?}")]
    BadLayerSizes(Vec<usize>),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One sweep cell: which ensemble to draw and how many networks to test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub layer_size_grid: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
}

/// Measured fraction of ideal networks in one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub layer_sizes: Vec<usize>,
    pub p: f64,
    pub trials: u64,
    pub ideal_count: u64,
    pub fraction: f64,
    /// Normal-approximation 95% binomial half-width, 1.96 sqrt(f(1-f)/n).
    pub ci95_halfwidth: f64,
    /// The seed this cell's trials were derived from.
    pub seed: u64,
    pub generator: &'static str,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<(), EnsembleError> {
    if layer_sizes.is_empty() || layer_sizes.contains(&0) {
        return Err(EnsembleError::BadLayerSizes(layer_sizes.to_vec()));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<(), EnsembleError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(EnsembleError::BadProbability(p));
    }
    Ok(())
}

/// Draws a layered network in which each potential edge between consecutive
/// layers exists independently with probability p. Edges are sampled in a
/// fixed order (matrix by matrix, row-major), so a seed pins the network.
pub fn random_network(
    layer_sizes: &[usize],
    p: f64,
    seed: u64,
) -> Result<LayeredNetwork, EnsembleError> {
    check_sizes(layer_sizes)?;
    check_probability(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = Vec::with_capacity(layer_sizes.len() - 1);
    for k in 0..layer_sizes.len() - 1 {
        let (cols, rows) = (layer_sizes[k], layer_sizes[k + 1]);
        let mut m = BoolMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if rng.gen_bool(p) {
                    m.set(i, j, true);
                }
            }
        }
        matrices.push(m);
    }
    Ok(LayeredNetwork::new(layer_sizes.to_vec(), matrices).expect("sizes checked above"))
}

/// Estimates the probability that a random network is ideal. Three-layer
/// ensembles (two explicit layers) use the precision-independent test;
/// deeper stacks are judged at unit precisions, which is this tool's
/// convention for "ideal" in the n-layer case. Trial t draws its network
/// from derive_seed(master_seed, [t]).
pub fn p_ideal(
    layer_sizes: &[usize],
    p: f64,
    trials: u64,
    master_seed: u64,
) -> Result<EnsembleResult, EnsembleError> {
    check_sizes(layer_sizes)?;
    check_probability(p)?;
    if trials == 0 {
        return Err(EnsembleError::NoTrials);
    }
    let ideal_count = (0..trials)
        .into_par_iter()
        .map(|t| {
            let net = random_network(layer_sizes, p, derive_seed(master_seed, &[t]))
                .expect("parameters validated");
            let ideal = if layer_sizes.len() == 2 {
                is_ideal_three_layer(&net).expect("two explicit layers")
            } else {
                is_ideal(&net, &PrecisionVector::ones(layer_sizes[0]))
                    .expect("structurally valid network")
                    .ideal
            };
            u64::from(ideal)
        })
        .sum();
    let fraction = ideal_count as f64 / trials as f64;
    let ci95_halfwidth = 1.96 * (fraction * (1.0 - fraction) / trials as f64).sqrt();
    Ok(EnsembleResult {
        layer_sizes: layer_sizes.to_vec(),
        p,
        trials,
        ideal_count,
        fraction,
        ci95_halfwidth,
        seed: master_seed,
        generator: GENERATOR_NAME,
    })
}

/// Seed for one sweep cell, mixed from the cell's content rather than its
/// grid position: reordering or extending the grid never changes what an
/// existing cell measures.
pub fn cell_seed(master_seed: u64, layer_sizes: &[usize], p: f64) -> u64 {
    let mut words = Vec::with_capacity(layer_sizes.len() + 2);
    words.push(layer_sizes.len() as u64);
    words.extend(layer_sizes.iter().map(|&s| s as u64));
    words.push(p.to_bits());
    derive_seed(master_seed, &words)
}

/// Runs p_ideal over the Cartesian product of the size grid and the
/// probability list, in deterministic grid-major order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<EnsembleResult>, EnsembleError> {
    if spec.trials == 0 {
        return Err(EnsembleError::NoTrials);
    }
    for sizes in &spec.layer_size_grid {
        check_sizes(sizes)?;
    }
    for &p in &spec.probabilities {
        check_probability(p)?;
    }
    let mut results = Vec::with_capacity(spec.layer_size_grid.len() * spec.probabilities.len());
    for sizes in &spec.layer_size_grid {
        for &p in &spec.probabilities {
            results.push(p_ideal(
                sizes,
                p,
                spec.trials,
                cell_seed(spec.master_seed, sizes, p),
            )?);
        }
    }
    Ok(results)
}

/// Writes sweep results as CSV. The layer count column includes the implicit
/// final aggregator, so a [L1, L2] cell reports n_layers=3. An L3 column
/// appears when any cell has three explicit layers.
pub fn write_sweep_csv<W: Write>(
    out: W,
    results: &[EnsembleResult],
    master_seed: u64,
) -> Result<(), EnsembleError> {
    let with_l3 = results.iter().any(|r| r.layer_sizes.len() >= 3);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n_layers", "L1", "L2"];
    if with_l3 {
        header.push("L3");
    }
    header.extend_from_slice(&[
        "p",
        "trials",
        "ideal_count",
        "fraction",
        "ci95_halfwidth",
        "master_seed",
        "generator_name",
    ]);
    w.write_record(&header)?;
    for r in results {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        record.push((r.layer_sizes.len() + 1).to_string());
        record.push(r.layer_sizes[0].to_string());
        record.push(r.layer_sizes.get(1).map_or_else(String::new, |v| v.to_string()));
        if with_l3 {
            record.push(r.layer_sizes.get(2).map_or_else(String::new, |v| v.to_string()));
        }
        record.push(r.p.to_string());
        record.push(r.trials.to_string());
        record.push(r.ideal_count.to_string());
        record.push(r.fraction.to_string());
        record.push(r.ci95_halfwidth.to_string());
        record.push(master_seed.to_string());
        record.push(GENERATOR_NAME.to_owned());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
