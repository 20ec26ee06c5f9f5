use std::collections::BTreeMap;

use super::{ClosureView, IncestError};
use crate::belief::Belief;

/// Integer weights `w_n = T_{n-1}⁻¹ t_n`; `weights[m - 1]` belongs to node `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionWeights {
    pub node: usize,
    pub weights: Vec<i64>,
}

impl FusionWeights {
    /// Nonzero `(m, w_n(m))` pairs in node order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0)
            .map(|(i, &w)| (i + 1, w))
    }
}

/// Solves the unit upper-triangular system `T_{n-1} w = t_n` exactly.
pub fn fusion_weights(view: &ClosureView, node: usize) -> Result<FusionWeights, IncestError> {
    if node == 0 || node > view.size() {
        return Err(IncestError::NodeOutOfRange {
            node,
            nodes: view.size(),
        });
    }
    let t = view.column_prefix(node);
    let len = node - 1;
    let mut w = vec![0i64; len];
    for i in (0..len).rev() {
        let mut acc = i64::from(t[i]);
        for j in (i + 1)..len {
            if view.get(i + 1, j + 1) == 1 {
                acc = acc
                    .checked_sub(w[j])
                    .ok_or(IncestError::WeightOverflow { node })?;
            }
        }
        w[i] = acc;
    }
    Ok(FusionWeights { node, weights: w })
}

/// Whether the fair rating is computable at a node from its direct neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Achievability {
    pub node: usize,
    pub achievable: bool,
    /// Nodes with a nonzero weight but no edge into `node`.
    pub violations: Vec<usize>,
    pub weights: FusionWeights,
}

pub fn achievability(view: &ClosureView, node: usize) -> Result<Achievability, IncestError> {
    let weights = fusion_weights(view, node)?;
    let violations: Vec<usize> = weights
        .nonzero()
        .filter(|&(m, _)| !view.has_edge(m, node))
        .map(|(m, _)| m)
        .collect();
    Ok(Achievability {
        node,
        achievable: violations.is_empty(),
        violations,
        weights,
    })
}

/// Log public beliefs relative to the prior, `l_m = log π_m - log π_0`.
///
/// States with zero prior mass get relative log-belief 0; they stay
/// impossible because the prior term is added back once at fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBeliefLedger {
    prior: Belief,
    entries: BTreeMap<usize, Vec<f64>>,
}

impl LogBeliefLedger {
    pub fn new(prior: Belief) -> Self {
        LogBeliefLedger {
            prior,
            entries: BTreeMap::new(),
        }
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn record(&mut self, node: usize, public: &Belief) -> Result<(), IncestError> {
        if public.len() != self.prior.len() {
            return Err(IncestError::LengthMismatch {
                expected: self.prior.len(),
                got: public.len(),
            });
        }
        let rel = public
            .probs()
            .iter()
            .zip(self.prior.probs())
            .map(|(&p, &p0)| if p0 > 0.0 { p.ln() - p0.ln() } else { 0.0 })
            .collect();
        self.entries.insert(node, rel);
        Ok(())
    }

    pub fn get(&self, node: usize) -> Option<&[f64]> {
        self.entries.get(&node).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The entries a node with single-hop set `received` actually sees.
    pub fn restricted(&self, received: &[usize]) -> Self {
        LogBeliefLedger {
            prior: self.prior.clone(),
            entries: received
                .iter()
                .filter_map(|m| self.entries.get(m).map(|l| (*m, l.clone())))
                .collect(),
        }
    }
}

/// `log π_{n-} = log π_0 + Σ_m w_n(m) l_m`, normalised.
pub fn fuse_fair(ledger: &LogBeliefLedger, check: &Achievability) -> Result<Belief, IncestError> {
    let node = check.node;
    if !check.achievable {
        return Err(IncestError::NotAchievable {
            node,
            violations: check.violations.clone(),
        });
    }
    let prior = ledger.prior.probs();
    let mut log_fused: Vec<f64> = prior
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect();
    for (m, w) in check.weights.nonzero() {
        let l = ledger
            .get(m)
            .ok_or(IncestError::MissingBelief { node, missing: m })?;
        for ((acc, &li), &p) in log_fused.iter_mut().zip(l).zip(prior) {
            if p > 0.0 {
                *acc += w as f64 * li;
            }
        }
    }
    let top = log_fused.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() || log_fused.iter().any(|v| v.is_nan()) {
        return Err(IncestError::DegenerateFusion { node });
    }
    Belief::from_weights(log_fused.iter().map(|&v| (v - top).exp()).collect())
        .ok_or(IncestError::DegenerateFusion { node })
}

/// Normalised sum of the received public beliefs.
pub fn fuse_naive(received: &[Belief]) -> Result<Belief, IncestError> {
    let first = received.first().ok_or(IncestError::NothingReceived)?;
    let mut sum = vec![0.0; first.len()];
    for b in received {
        if b.len() != sum.len() {
            return Err(IncestError::LengthMismatch {
                expected: sum.len(),
                got: b.len(),
            });
        }
        for (s, &p) in sum.iter_mut().zip(b.probs()) {
            *s += p;
        }
    }
    Ok(Belief::from_weights(sum).expect("sum of beliefs has positive mass"))
}

#[cfg(test)]
mod tests {
    use super::super::graph::tests::example_graph;
    use super::*;

    #[test]
    fn example_weights() {
        let view = example_graph().transitive_closure().unwrap();
        let w = |n| fusion_weights(&view, n).unwrap().weights;
        assert_eq!(w(1), Vec::<i64>::new());
        assert_eq!(w(2), vec![0]);
        assert_eq!(w(3), vec![1, 1]);
        assert_eq!(w(4), vec![1, 1, 0]);
        assert_eq!(w(5), vec![-1, -1, 1, 1]);
        assert_eq!(w(6), vec![-1, -1, 1, 1, 0]);
    }

    #[test]
    fn example_achievability() {
        let view = example_graph().transitive_closure().unwrap();
        for n in 1..=5 {
            assert!(achievability(&view, n).unwrap().achievable, "node {n}");
        }
        let six = achievability(&view, 6).unwrap();
        assert!(!six.achievable);
        assert_eq!(six.violations, vec![1]);
    }

    #[test]
    fn dropping_an_edge_breaks_achievability() {
        let mut g = example_graph().prefix(5);
        assert!(g.remove_edge(2, 5));
        let view = g.transitive_closure().unwrap();
        let check = achievability(&view, 5).unwrap();
        assert_eq!(check.weights.weights, vec![-1, -1, 1, 1]);
        assert_eq!(check.violations, vec![2]);
        let ledger = LogBeliefLedger::new(Belief::uniform(2));
        assert_eq!(
            fuse_fair(&ledger, &check),
            Err(IncestError::NotAchievable {
                node: 5,
                violations: vec![2]
            })
        );
    }

    #[test]
    fn fair_fusion_is_weighted_product() {
        let view = example_graph().transitive_closure().unwrap();
        let check = achievability(&view, 5).unwrap();
        let prior = Belief::new(vec![0.3, 0.7]).unwrap();
        let beliefs = [
            Belief::new(vec![0.4, 0.6]).unwrap(),
            Belief::new(vec![0.2, 0.8]).unwrap(),
            Belief::new(vec![0.1, 0.9]).unwrap(),
            Belief::new(vec![0.5, 0.5]).unwrap(),
        ];
        let mut ledger = LogBeliefLedger::new(prior.clone());
        for (i, b) in beliefs.iter().enumerate() {
            ledger.record(i + 1, b).unwrap();
        }
        let fused = fuse_fair(&ledger, &check).unwrap();
        // π0 · (π3 π4) / (π1 π2) · π0^{-1-1+1+1}
        let raw: Vec<f64> = (0..2)
            .map(|i| {
                prior.get(i) * beliefs[2].get(i) * beliefs[3].get(i)
                    / (beliefs[0].get(i) * beliefs[1].get(i))
            })
            .collect();
        let expected = Belief::from_weights(raw).unwrap();
        assert!(fused.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn missing_neighbour_belief_reported() {
        let view = example_graph().transitive_closure().unwrap();
        let check = achievability(&view, 3).unwrap();
        let mut ledger = LogBeliefLedger::new(Belief::uniform(2));
        ledger.record(1, &Belief::two_state(0.3)).unwrap();
        assert_eq!(
            fuse_fair(&ledger.restricted(&[1]), &check),
            Err(IncestError::MissingBelief {
                node: 3,
                missing: 2
            })
        );
    }

    #[test]
    fn zero_prior_state_stays_impossible() {
        let prior = Belief::new(vec![0.0, 0.4, 0.6]).unwrap();
        let mut ledger = LogBeliefLedger::new(prior);
        ledger
            .record(1, &Belief::new(vec![0.0, 0.5, 0.5]).unwrap())
            .unwrap();
        ledger
            .record(2, &Belief::new(vec![0.0, 0.2, 0.8]).unwrap())
            .unwrap();
        let check = Achievability {
            node: 3,
            achievable: true,
            violations: vec![],
            weights: FusionWeights {
                node: 3,
                weights: vec![1, 1],
            },
        };
        let fused = fuse_fair(&ledger, &check).unwrap();
        assert_eq!(fused.get(0), 0.0);
        // 0.4 · (0.5/0.4)(0.2/0.4) vs 0.6 · (0.5/0.6)(0.8/0.6)
        let a = 0.5 * 0.2 / 0.4;
        let b = 0.5 * 0.8 / 0.6;
        assert!((fused.get(1) - a / (a + b)).abs() < 1e-12);
    }

    #[test]
    fn naive_fusion_averages() {
        let fused = fuse_naive(&[Belief::two_state(0.2), Belief::two_state(0.6)]).unwrap();
        assert!((fused.get(1) - 0.4).abs() < 1e-15);
        assert_eq!(fuse_naive(&[]), Err(IncestError::NothingReceived));
    }
}
