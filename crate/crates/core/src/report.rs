//! One-stop analysis of a network: validation, the final estimator, the
//! ideality verdict with its certificate, motif evidence, and (for
//! three-layer networks) the reduced connectivity. This is what the CLI's
//! `analyze` prints as JSON.

use crate::analysis::{has_w_motif, is_ideal, reduce, AnalysisError, WMotifWitness};
use crate::estimation::{final_estimate_from, weight_profiles, EstimationError};
use crate::net::{LayeredNetwork, PrecisionVector, ValidationReport};
use crate::rat::{format_rat, rat_to_f64, Rat};
use serde::Serialize;

/// A rational reported both ways: exactly, and as a reading aid.
#[derive(Clone, Debug, Serialize)]
pub struct ValuePair {
    pub exact: String,
    pub float: f64,
}

impl ValuePair {
    fn of(value: &Rat) -> Self {
        ValuePair {
            exact: format_rat(value),
            float: rat_to_f64(value),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    /// Final weight on each first-layer measurement.
    pub alpha: Vec<ValuePair>,
    pub variance: ValuePair,
    pub ideal_variance: ValuePair,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeReport {
    pub layers: Vec<usize>,
    pub precisions: Vec<String>,
    pub validation: ValidationReport,
    /// Per layer, which agents carry any information.
    pub validity: Vec<Vec<bool>>,
    /// Absent when no information reaches the aggregator.
    pub estimate: Option<EstimateReport>,
    pub ideal: bool,
    pub certificate: Option<Vec<String>>,
    pub w_motif_witness: Option<WMotifWitness>,
    /// Three-layer networks only: connectivity after removing redundant links.
    pub reduced_connectivity: Option<Vec<Vec<u8>>>,
}

pub fn analyze(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
) -> Result<AnalyzeReport, AnalysisError> {
    let profiles = weight_profiles(net, precisions)?;
    let validity: Vec<Vec<bool>> = profiles.iter().map(|p| p.valid.clone()).collect();
    let estimate = match final_estimate_from(profiles.last().expect("layers"), precisions) {
        Ok(fe) => Some(EstimateReport {
            alpha: fe.alpha.iter().map(ValuePair::of).collect(),
            variance: ValuePair::of(&fe.variance),
            ideal_variance: ValuePair::of(&fe.ideal_variance),
        }),
        Err(EstimationError::NoInformation) => None,
        Err(e) => return Err(e.into()),
    };
    let verdict = is_ideal(net, precisions)?;
    let reduced_connectivity = if net.layer_count() == 2 {
        Some(reduce(net)?.connectivity(1).to_binary_rows())
    } else {
        None
    };
    Ok(AnalyzeReport {
        layers: net.layer_sizes().to_vec(),
        precisions: precisions.values().iter().map(format_rat).collect(),
        validation: net.validate(),
        validity,
        estimate,
        ideal: verdict.ideal,
        certificate: verdict
            .certificate
            .map(|cert| cert.iter().map(format_rat).collect()),
        w_motif_witness: has_w_motif(net),
        reduced_connectivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::network_from_rows;

    #[test]
    fn overlap_pair_report() {
        let net = network_from_rows(vec![3, 2], &[vec![vec![1, 1, 0], vec![0, 1, 1]]]).unwrap();
        let report = analyze(&net, &PrecisionVector::ones(3)).unwrap();
        assert!(report.validation.ok);
        assert_eq!(report.validity, vec![vec![true; 3], vec![true; 2]]);
        let est = report.estimate.unwrap();
        assert_eq!(
            est.alpha.iter().map(|v| v.exact.clone()).collect::<Vec<_>>(),
            vec!["1/4", "1/2", "1/4"]
        );
        assert_eq!(est.alpha[0].float, 0.25);
        assert_eq!(est.variance.exact, "3/8");
        assert_eq!(est.variance.float, 0.375);
        assert_eq!(est.ideal_variance.exact, "1/3");
        assert!(!report.ideal);
        assert!(report.certificate.is_none());
        let wit = report.w_motif_witness.unwrap();
        assert_eq!((wit.to_layer, wit.agents, wit.sources), (2, (1, 2), (1, 2, 3)));
        // Neither input set contains the other, so reduction keeps the links.
        assert_eq!(
            report.reduced_connectivity.unwrap(),
            vec![vec![1, 1, 0], vec![0, 1, 1]]
        );
    }

    #[test]
    fn ideal_report_carries_certificate() {
        let net = network_from_rows(
            vec![3, 3],
            &[vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]],
        )
        .unwrap();
        let report = analyze(&net, &PrecisionVector::ones(3)).unwrap();
        assert!(report.ideal);
        assert_eq!(report.certificate.unwrap(), vec!["1", "1", "1"]);
        assert_eq!(report.precisions, vec!["1", "1", "1"]);
    }

    #[test]
    fn dead_network_report() {
        let net = network_from_rows(vec![2, 1], &[vec![vec![0, 0]]]).unwrap();
        let report = analyze(&net, &PrecisionVector::ones(2)).unwrap();
        assert!(!report.validation.ok);
        assert!(report.estimate.is_none());
        assert!(!report.ideal);
        assert_eq!(report.validity, vec![vec![true, true], vec![false]]);
    }

    #[test]
    fn deeper_network_has_no_reduction_field() {
        let net = network_from_rows(
            vec![2, 2, 1],
            &[
                vec![vec![1, 0], vec![0, 1]],
                vec![vec![1, 1]],
            ],
        )
        .unwrap();
        let report = analyze(&net, &PrecisionVector::ones(2)).unwrap();
        assert!(report.reduced_connectivity.is_none());
        assert!(report.ideal);
        let est = report.estimate.unwrap();
        assert_eq!(est.variance.exact, "1/2");
    }

    #[test]
    fn report_serializes() {
        let net = network_from_rows(vec![3, 2], &[vec![vec![1, 1, 0], vec![0, 1, 1]]]).unwrap();
        let report = analyze(&net, &PrecisionVector::ones(3)).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["estimate"]["variance"]["exact"], "3/8");
        assert_eq!(json["w_motif_witness"]["to_layer"], 2);
        assert!(json["certificate"].is_null());
    }
}
