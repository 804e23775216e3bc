//! Ideality decisions, obstruction-motif detection, three-layer reduction,
//! and the extremal ring construction.

use crate::estimation::{weight_profiles, EstimationError};
use crate::linalg::{int_rowspace_contains, rat_rowspace_express};
use crate::net::{BoolMat, LayeredNetwork, NetError, PrecisionVector};
use crate::rat::{rat, Rat};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(
        "needs a three-layer network (two explicit layers plus the aggregator), \
         found {found} explicit layers"
    )]
    WrongLayerCount { found: usize },
    #[error("first-layer agent {agent} has out-degree zero")]
    ZeroOutDegree { agent: usize },
    #[error("a ring needs at least one outer agent")]
    EmptyRing,
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Answer to "does the final estimate achieve the ideal variance?".
///
/// When it does, `certificate` holds one coefficient per last-layer agent
/// with certificate^T * (last-layer weight rows) = (w_1, ..., w_{L1}) exactly;
/// invalid agents get coefficient zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealityVerdict {
    pub ideal: bool,
    pub certificate: Option<Vec<Rat>>,
}

/// Location of an information-losing pattern: two agents of layer `to_layer`
/// whose first-layer sources form the 2x3 pattern [[1,1,0],[0,1,1]] (one
/// private source each plus a shared one).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WMotifWitness {
    pub to_layer: usize,
    pub agents: (usize, usize),
    pub sources: (usize, usize, usize),
}

/// Exact test of whether the network wastes information: the final variance
/// equals 1/sum(w) precisely when the precision vector lies in the rational
/// row space of the last layer's weight rows. Members come back with the
/// expressing coefficients in the same call; the decision screens mod a large
/// prime and only touches exact big-integer elimination where it must.
pub fn is_ideal(
    net: &LayeredNetwork,
    precisions: &PrecisionVector,
) -> Result<IdealityVerdict, AnalysisError> {
    let profiles = weight_profiles(net, precisions)?;
    let last = profiles.last().expect("at least one layer");
    let valid = last.valid_rows();
    let target = precisions.values();
    let rows: Vec<&[Rat]> = valid.iter().map(|(_, row)| *row).collect();
    match rat_rowspace_express(&rows, target) {
        None => Ok(IdealityVerdict {
            ideal: false,
            certificate: None,
        }),
        Some(combo) => {
            let mut certificate = vec![Rat::zero(); net.layer_size(net.layer_count())];
            for ((agent, _), coeff) in valid.iter().zip(combo) {
                certificate[*agent] = coeff;
            }
            Ok(IdealityVerdict {
                ideal: true,
                certificate: Some(certificate),
            })
        }
    }
}

/// Precision-independent ideality test for three-layer networks: the all-ones
/// vector must lie in the rational row space of the connectivity matrix.
pub fn is_ideal_three_layer(net: &LayeredNetwork) -> Result<bool, AnalysisError> {
    if net.layer_count() != 2 {
        return Err(AnalysisError::WrongLayerCount {
            found: net.layer_count(),
        });
    }
    let c = net.connectivity(1);
    let rows: Vec<Vec<BigInt>> = (0..c.rows())
        .map(|i| (0..c.cols()).map(|j| BigInt::from(c.get(i, j) as u8)).collect())
        .collect();
    let ones = vec![BigInt::one(); c.cols()];
    Ok(int_rowspace_contains(&rows, &ones))
}

/// Finds the lexicographically first W-motif across every path matrix from
/// the first layer, or none. Ordering: target layer, then the agent pair,
/// then the smallest qualifying source triple.
pub fn has_w_motif(net: &LayeredNetwork) -> Option<WMotifWitness> {
    for k in 2..=net.layer_count() {
        let p = net
            .path_matrix(1, k)
            .expect("1 < k <= layer_count is always a valid span");
        for i1 in 0..p.rows() {
            for i2 in i1 + 1..p.rows() {
                let mut private1 = None;
                let mut shared = None;
                let mut private2 = None;
                for j in 0..p.cols() {
                    match (p.get(i1, j), p.get(i2, j)) {
                        (true, false) => private1 = private1.or(Some(j)),
                        (true, true) => shared = shared.or(Some(j)),
                        (false, true) => private2 = private2.or(Some(j)),
                        (false, false) => {}
                    }
                }
                if let (Some(n1), Some(m), Some(n2)) = (private1, shared, private2) {
                    return Some(WMotifWitness {
                        to_layer: k,
                        agents: (i1 + 1, i2 + 1),
                        sources: (n1 + 1, m + 1, n2 + 1),
                    });
                }
            }
        }
    }
    None
}

/// Removes redundant listening from a three-layer network: whenever one
/// agent's (nonempty) input set is contained in another's, the larger
/// listener drops the shared sources. Repeats with lexicographic pair choice
/// until no containment remains. Every application deletes at least one edge,
/// so this terminates, and the final estimate is unchanged because each step
/// is an invertible row operation on the second layer's weight rows.
pub fn reduce(net: &LayeredNetwork) -> Result<LayeredNetwork, AnalysisError> {
    if net.layer_count() != 2 {
        return Err(AnalysisError::WrongLayerCount {
            found: net.layer_count(),
        });
    }
    let mut c = net.connectivity(1).clone();
    'outer: loop {
        for i in 0..c.rows() {
            if c.row_sum(i) == 0 {
                continue;
            }
            for j in 0..c.rows() {
                if i == j {
                    continue;
                }
                let contained = (0..c.cols()).all(|col| !c.get(i, col) || c.get(j, col));
                if !contained {
                    continue;
                }
                for col in 0..c.cols() {
                    if c.get(i, col) {
                        c.set(j, col, false);
                    }
                }
                continue 'outer;
            }
        }
        break;
    }
    Ok(LayeredNetwork::new(net.layer_sizes().to_vec(), vec![c])?)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// True iff every first-layer agent communicates and, within every connected
/// component of the first-two-layer bipartite graph, all first-layer agents
/// have the same out-degree. A sufficient condition for three-layer
/// ideality, not a necessary one. (An unheard agent would make its singleton
/// component vacuously equal while its measurement is lost, so zero
/// out-degrees fail the condition.)
pub fn equal_outdegree_components(net: &LayeredNetwork) -> Result<bool, AnalysisError> {
    if net.layer_count() != 2 {
        return Err(AnalysisError::WrongLayerCount {
            found: net.layer_count(),
        });
    }
    let c = net.connectivity(1);
    let (l1, l2) = (c.cols(), c.rows());
    let mut uf = UnionFind::new(l1 + l2);
    for i in 0..l2 {
        for j in 0..l1 {
            if c.get(i, j) {
                uf.union(j, l1 + i);
            }
        }
    }
    let degrees = net.out_degrees(1)?;
    if degrees.contains(&0) {
        return Ok(false);
    }
    let mut component_degree = vec![None; l1 + l2];
    for (j, &degree) in degrees.iter().enumerate() {
        let root = uf.find(j);
        match component_degree[root] {
            None => component_degree[root] = Some(degree),
            Some(d) if d == degree => {}
            Some(_) => return Ok(false),
        }
    }
    Ok(true)
}

/// The hub-and-spokes network: n outer agents each hear a common central
/// first-layer agent plus one private one (n+1 first-layer, n second-layer).
pub fn ring_network(n: usize) -> Result<LayeredNetwork, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::EmptyRing);
    }
    let mut c = BoolMat::zeros(n, n + 1);
    for i in 0..n {
        c.set(i, 0, true);
        c.set(i, i + 1, true);
    }
    Ok(LayeredNetwork::new(vec![n + 1, n], vec![c])?)
}

/// Final-estimate variance of ring_network(n) at unit precisions:
/// 1/4 + 1/(4n). The hub keeps weight 1/2 no matter how large n grows, so
/// this never drops below 1/4.
pub fn ring_variance(n: usize) -> Result<Rat, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::EmptyRing);
    }
    Ok(rat(1, 4) + rat(1, 4 * n as i64))
}

/// Degree-proportional first-layer weights d/sum(d); the variance they give,
/// sum((d_i/sum d)^2 / w_i), upper-bounds the network's final variance.
pub fn naive_weights(net: &LayeredNetwork) -> Result<Vec<Rat>, AnalysisError> {
    if net.layer_count() != 2 {
        return Err(AnalysisError::WrongLayerCount {
            found: net.layer_count(),
        });
    }
    let degrees = net.out_degrees(1)?;
    if let Some(agent) = degrees.iter().position(|&d| d == 0) {
        return Err(AnalysisError::ZeroOutDegree { agent: agent + 1 });
    }
    let total: usize = degrees.iter().sum();
    Ok(degrees
        .into_iter()
        .map(|d| rat(d as i64, total as i64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::final_estimate;
    use crate::net::network_from_rows;
    use crate::rat::rat_int;

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

    fn check_certificate(net: &LayeredNetwork, w: &PrecisionVector, cert: &[Rat]) {
        let profiles = weight_profiles(net, w).unwrap();
        let last = profiles.last().unwrap();
        let n = w.len();
        let mut rebuilt = vec![Rat::zero(); n];
        for (i, coeff) in cert.iter().enumerate() {
            for (acc, v) in rebuilt.iter_mut().zip(last.rows.row(i)) {
                *acc += coeff * v;
            }
        }
        assert_eq!(rebuilt, w.values());
    }

    #[test]
    fn ideality_golden_cases() {
        let w = PrecisionVector::ones(3);
        let v = is_ideal(&overlap_pair(), &w).unwrap();
        assert!(!v.ideal);
        assert!(v.certificate.is_none());

        let v = is_ideal(&shared_cycle(), &w).unwrap();
        assert!(v.ideal);
        let cert = v.certificate.unwrap();
        assert_eq!(cert, vec![rat_int(1), rat_int(1), rat_int(1)]);
        check_certificate(&shared_cycle(), &w, &cert);
    }

    #[test]
    fn identity_stack_is_ideal() {
        let net = network_from_rows(
            vec![2, 2, 2],
            &[
                vec![vec![1, 0], vec![0, 1]],
                vec![vec![1, 0], vec![0, 1]],
            ],
        )
        .unwrap();
        let w = PrecisionVector::new(vec![rat(2, 3), rat_int(5)]).unwrap();
        let v = is_ideal(&net, &w).unwrap();
        assert!(v.ideal);
        let cert = v.certificate.unwrap();
        assert_eq!(cert, w.values());
        check_certificate(&net, &w, &cert);
    }

    #[test]
    fn dead_network_is_not_ideal() {
        let net = network_from_rows(vec![2, 1], &[vec![vec![0, 0]]]).unwrap();
        let v = is_ideal(&net, &PrecisionVector::ones(2)).unwrap();
        assert!(!v.ideal);
    }

    #[test]
    fn three_layer_test_matches_examples() {
        assert!(!is_ideal_three_layer(&overlap_pair()).unwrap());
        assert!(is_ideal_three_layer(&shared_cycle()).unwrap());
        let ident = network_from_rows(vec![2, 2], &[vec![vec![1, 0], vec![0, 1]]]).unwrap();
        assert!(is_ideal_three_layer(&ident).unwrap());

        let deep = network_from_rows(vec![1, 1, 1], &[vec![vec![1]], vec![vec![1]]]).unwrap();
        assert!(matches!(
            is_ideal_three_layer(&deep),
            Err(AnalysisError::WrongLayerCount { found: 3 })
        ));
    }

    #[test]
    fn motif_detection() {
        let witness = has_w_motif(&overlap_pair()).unwrap();
        assert_eq!(witness.to_layer, 2);
        assert_eq!(witness.agents, (1, 2));
        assert_eq!(witness.sources, (1, 2, 3));

        // Ideal networks may still carry the motif.
        assert!(has_w_motif(&shared_cycle()).is_some());

        let ident = network_from_rows(vec![2, 2], &[vec![vec![1, 0], vec![0, 1]]]).unwrap();
        assert!(has_w_motif(&ident).is_none());
    }

    #[test]
    fn motif_found_only_deeper() {
        // Layer 2 copies sources one-to-one; the overlap appears at layer 3.
        let net = network_from_rows(
            vec![3, 3, 2],
            &[
                vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
                vec![vec![1, 1, 0], vec![0, 1, 1]],
            ],
        )
        .unwrap();
        let witness = has_w_motif(&net).unwrap();
        assert_eq!(witness.to_layer, 3);
        assert_eq!(witness.agents, (1, 2));
        assert_eq!(witness.sources, (1, 2, 3));
    }

    #[test]
    fn reduction_examples() {
        let net = network_from_rows(vec![2, 2], &[vec![vec![1, 0], vec![1, 1]]]).unwrap();
        let reduced = reduce(&net).unwrap();
        assert_eq!(
            reduced.connectivity(1).to_binary_rows(),
            vec![vec![1, 0], vec![0, 1]]
        );

        let net = network_from_rows(vec![3, 2], &[vec![vec![1, 1, 0], vec![1, 1, 1]]]).unwrap();
        let reduced = reduce(&net).unwrap();
        assert_eq!(
            reduced.connectivity(1).to_binary_rows(),
            vec![vec![1, 1, 0], vec![0, 0, 1]]
        );

        let deep = network_from_rows(vec![1, 1, 1], &[vec![vec![1]], vec![vec![1]]]).unwrap();
        assert!(reduce(&deep).is_err());
    }

    #[test]
    fn reduction_handles_equal_rows() {
        let net = network_from_rows(vec![2, 2], &[vec![vec![1, 1], vec![1, 1]]]).unwrap();
        let reduced = reduce(&net).unwrap();
        assert_eq!(
            reduced.connectivity(1).to_binary_rows(),
            vec![vec![1, 1], vec![0, 0]]
        );
    }

    #[test]
    fn reduction_preserves_estimate() {
        let w = PrecisionVector::new(vec![rat(1, 2), rat_int(3), rat_int(1)]).unwrap();
        let net = network_from_rows(vec![3, 2], &[vec![vec![1, 1, 0], vec![1, 1, 1]]]).unwrap();
        let before = final_estimate(&net, &w).unwrap();
        let after = final_estimate(&reduce(&net).unwrap(), &w).unwrap();
        assert_eq!(before.alpha, after.alpha);
        assert_eq!(before.variance, after.variance);
    }

    #[test]
    fn component_degree_condition() {
        assert!(equal_outdegree_components(&shared_cycle()).unwrap());
        assert!(!equal_outdegree_components(&overlap_pair()).unwrap());

        // Two components with internally equal (but different) degrees.
        let net = network_from_rows(
            vec![4, 2],
            &[vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1]]],
        )
        .unwrap();
        assert!(equal_outdegree_components(&net).unwrap());

        // An unheard first-layer agent fails the condition even though its
        // singleton component is vacuously equal.
        let unheard = network_from_rows(vec![2, 1], &[vec![vec![1, 0]]]).unwrap();
        assert!(!equal_outdegree_components(&unheard).unwrap());
    }

    #[test]
    fn ring_construction_and_variance() {
        let ring1 = ring_network(1).unwrap();
        assert_eq!(ring1.connectivity(1).to_binary_rows(), vec![vec![1, 1]]);
        assert_eq!(ring_variance(1).unwrap(), rat(1, 2));

        let ring4 = ring_network(4).unwrap();
        let fe = final_estimate(&ring4, &PrecisionVector::ones(5)).unwrap();
        assert_eq!(fe.variance, rat(5, 16));
        assert_eq!(ring_variance(4).unwrap(), rat(5, 16));
        assert_eq!(
            fe.alpha,
            vec![rat(1, 2), rat(1, 8), rat(1, 8), rat(1, 8), rat(1, 8)]
        );

        assert_eq!(ring_variance(100).unwrap(), rat(1, 4) + rat(1, 400));
        assert!(ring_network(0).is_err());
        assert!(ring_variance(0).is_err());
    }

    #[test]
    fn naive_weighting() {
        assert_eq!(
            naive_weights(&overlap_pair()).unwrap(),
            vec![rat(1, 4), rat(1, 2), rat(1, 4)]
        );
        // On this instance the naive weights happen to equal the final alpha.
        let fe = final_estimate(&overlap_pair(), &PrecisionVector::ones(3)).unwrap();
        assert_eq!(naive_weights(&overlap_pair()).unwrap(), fe.alpha);

        // Ring: hub has degree n, spokes degree 1.
        let ring = ring_network(4).unwrap();
        let naive = naive_weights(&ring).unwrap();
        assert_eq!(
            naive,
            vec![rat(1, 2), rat(1, 8), rat(1, 8), rat(1, 8), rat(1, 8)]
        );
        let fe = final_estimate(&ring, &PrecisionVector::ones(5)).unwrap();
        assert_eq!(naive, fe.alpha);

        let equal = shared_cycle();
        assert_eq!(
            naive_weights(&equal).unwrap(),
            vec![rat(1, 3), rat(1, 3), rat(1, 3)]
        );

        let dead_col = network_from_rows(vec![2, 1], &[vec![vec![1, 0]]]).unwrap();
        assert!(matches!(
            naive_weights(&dead_col),
            Err(AnalysisError::ZeroOutDegree { agent: 2 })
        ));
    }
}
