//! Finite-state Markov chain of tank-volume evolution.
//!
//! States are pairs `(i, kappa)` of volume index and phase. All probability
//! mass moves from phase `kappa` to phase `kappa + 1 mod T`, so the full
//! transition matrix is block-structured: one `(n+1) x (n+1)` block per
//! phase. The stationary distribution solves the balance equations together
//! with the normalization constraint.

use nalgebra::{DMatrix, DVector};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::gaussian;
use crate::model::{validate_instance, ChainSpec, PriceModel, QuantizedDemandModel, ThresholdPolicy};

/// Residual tolerance for the stationary solve.
pub const STATIONARY_TOL: f64 = 1e-10;

/// Above this state count, periodic chains are solved through the per-period
/// composite block instead of the assembled full system.
const DENSE_LIMIT: usize = 1500;

/// One state of the volume chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    /// Volume index, `0..=n`.
    pub i: usize,
    /// Phase index, `0..T`.
    pub kappa: usize,
}

impl ChainState {
    /// Phase-major flat index: all volumes of phase 0 first, then phase 1, ...
    pub fn flat(&self, n: usize) -> usize {
        self.kappa * (n + 1) + self.i
    }
}

/// Block-structured transition matrix; `block(kappa)[(i, j)]` is the
/// probability of moving from `(i, kappa)` to `(j, kappa + 1 mod T)`.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    blocks: Vec<DMatrix<f64>>,
    n: usize,
    period_t: usize,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period_t(&self) -> usize {
        self.period_t
    }

    pub fn n_states(&self) -> usize {
        (self.n + 1) * self.period_t
    }

    pub fn block(&self, kappa: usize) -> &DMatrix<f64> {
        &self.blocks[kappa]
    }

    /// Probability of the one-step transition `(i, kappa) -> (j, kappa+1)`.
    pub fn prob(&self, i: usize, kappa: usize, j: usize) -> f64 {
        self.blocks[kappa][(i, j)]
    }

    pub fn row_sum(&self, i: usize, kappa: usize) -> f64 {
        self.blocks[kappa].row(i).sum()
    }

    /// Nonzero transitions as `(from_i, from_kappa, to_i, to_kappa, prob)`.
    pub fn triplets(&self) -> Vec<(usize, usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (kappa, block) in self.blocks.iter().enumerate() {
            let next = (kappa + 1) % self.period_t;
            for i in 0..=self.n {
                for j in 0..=self.n {
                    let p = block[(i, j)];
                    if p > 0.0 {
                        out.push((i, kappa, j, next, p));
                    }
                }
            }
        }
        out
    }
}

/// Builds the volume-evolution chain for a validated instance and policy.
///
/// Per phase `kappa` and volume index `i`:
/// - `i > n_s`: never pump; demand level `tau` moves to `i - tau`.
/// - `n_p < i <= n_s`: pump with probability `F_kappa(alpha)`; mass
///   `F * a` goes to `i + zeta - tau` and `(1 - F) * a` to `i - tau`.
/// - `i <= n_p`: always pump; mass goes to `max(0, i + zeta - tau)`,
///   accumulating at the empty clamp.
///
/// Mass accumulates whenever two demand/pump combinations land on the same
/// target index.
pub fn build_chain(
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    spec: &ChainSpec,
    policy: &ThresholdPolicy,
) -> Result<TransitionMatrix> {
    validate_instance(demand, price, spec).into_result()?;
    policy.check_dims(spec)?;
    Ok(build_chain_trusted(demand, price, spec, policy))
}

/// [`build_chain`] without the instance re-validation, for hot loops whose
/// inputs were validated up front (only the policy values vary).
pub(crate) fn build_chain_trusted(
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    spec: &ChainSpec,
    policy: &ThresholdPolicy,
) -> TransitionMatrix {
    let n = spec.n;
    let mut blocks = Vec::with_capacity(spec.period_t);
    for kappa in 0..spec.period_t {
        let mut block = DMatrix::zeros(n + 1, n + 1);
        let probs = &demand.probs[kappa];
        for i in 0..=n {
            if i <= spec.n_p {
                for (tau, &a) in probs.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let j = (i + spec.zeta).saturating_sub(tau);
                    block[(i, j)] += a;
                }
            } else if i <= spec.n_s {
                let alpha = policy.alpha_at(i, kappa, spec);
                let pump = gaussian::cdf(alpha, price.mean[kappa], price.std[kappa]);
                for (tau, &a) in probs.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    if pump > 0.0 {
                        block[(i, i + spec.zeta - tau)] += pump * a;
                    }
                    if pump < 1.0 {
                        block[(i, i - tau)] += (1.0 - pump) * a;
                    }
                }
            } else {
                for (tau, &a) in probs.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    block[(i, i - tau)] += a;
                }
            }
        }
        blocks.push(block);
    }

    TransitionMatrix { blocks, n, period_t: spec.period_t }
}

fn positive_entry_graph(matrix: &TransitionMatrix) -> DiGraph<(), ()> {
    let n_states = matrix.n_states();
    let mut graph = DiGraph::with_capacity(n_states, n_states * 4);
    let nodes: Vec<NodeIndex> = (0..n_states).map(|_| graph.add_node(())).collect();
    for (from_i, from_kappa, to_i, to_kappa, _) in matrix.triplets() {
        let from = ChainState { i: from_i, kappa: from_kappa }.flat(matrix.n);
        let to = ChainState { i: to_i, kappa: to_kappa }.flat(matrix.n);
        graph.add_edge(nodes[from], nodes[to], ());
    }
    graph
}

/// Number of closed communicating classes (strongly connected components
/// with no edge leaving them). Exactly one closed class means a unique
/// stationary distribution.
fn closed_class_count(matrix: &TransitionMatrix) -> usize {
    let graph = positive_entry_graph(matrix);
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut component_of = vec![0usize; graph.node_count()];
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component_of[node.index()] = c;
        }
    }
    let mut closed = vec![true; sccs.len()];
    for edge in graph.raw_edges() {
        let a = component_of[edge.source().index()];
        let b = component_of[edge.target().index()];
        if a != b {
            closed[a] = false;
        }
    }
    closed.iter().filter(|c| **c).count()
}

/// True iff every state communicates with every other state: the graph of
/// strictly positive transition probabilities has a single strongly
/// connected component covering all states.
pub fn check_irreducible(matrix: &TransitionMatrix) -> bool {
    let graph = positive_entry_graph(matrix);
    let sccs = petgraph::algo::tarjan_scc(&graph);
    sccs.len() == 1
}

/// Stationary probabilities indexed like [`ChainState`].
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
    n: usize,
    period_t: usize,
}

impl StationaryDistribution {
    pub fn get(&self, i: usize, kappa: usize) -> f64 {
        self.pi[ChainState { i, kappa }.flat(self.n)]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period_t(&self) -> usize {
        self.period_t
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn iter_states(&self) -> impl Iterator<Item = (ChainState, f64)> + '_ {
        let n = self.n;
        self.pi.iter().enumerate().map(move |(flat, p)| {
            (ChainState { i: flat % (n + 1), kappa: flat / (n + 1) }, *p)
        })
    }
}

/// Infinity norm of `P^T pi - pi`, evaluated block-wise.
fn balance_residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    let n1 = matrix.n + 1;
    let mut residual: f64 = 0.0;
    for kappa in 0..matrix.period_t {
        let next = (kappa + 1) % matrix.period_t;
        let from = DVector::from_column_slice(&pi[kappa * n1..(kappa + 1) * n1]);
        let flowed = matrix.blocks[kappa].tr_mul(&from);
        for j in 0..n1 {
            residual = residual.max((flowed[j] - pi[next * n1 + j]).abs());
        }
    }
    residual
}

/// Solves the full balance system with one equation replaced by the
/// normalization row.
fn solve_full_system(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n1 = matrix.n + 1;
    let n_states = matrix.n_states();
    let mut a = DMatrix::zeros(n_states, n_states);
    for i in 0..n_states {
        a[(i, i)] = -1.0;
    }
    for (kappa, block) in matrix.blocks.iter().enumerate() {
        let next = (kappa + 1) % matrix.period_t;
        for i in 0..n1 {
            for j in 0..n1 {
                let p = block[(i, j)];
                if p > 0.0 {
                    a[(next * n1 + j, kappa * n1 + i)] += p;
                }
            }
        }
    }
    for col in 0..n_states {
        a[(n_states - 1, col)] = 1.0;
    }
    let mut b = DVector::zeros(n_states);
    b[n_states - 1] = 1.0;
    let solution = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Optimization("stationary linear system is singular".into()))?;
    Ok(solution.as_slice().to_vec())
}

/// Solves through the per-period composite `Q = P_0 P_1 ... P_{T-1}`:
/// the phase-0 marginal is stationary for `Q`, the other phases follow by
/// pushing mass forward one block at a time.
fn solve_composite(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n1 = matrix.n + 1;
    let mut composite = matrix.blocks[0].clone();
    for block in &matrix.blocks[1..] {
        composite *= block;
    }
    let mut a = composite.transpose();
    for i in 0..n1 {
        a[(i, i)] -= 1.0;
    }
    for col in 0..n1 {
        a[(n1 - 1, col)] = 1.0;
    }
    let mut b = DVector::zeros(n1);
    b[n1 - 1] = 1.0;
    let phase0 = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Optimization("stationary linear system is singular".into()))?;

    let scale = 1.0 / matrix.period_t as f64;
    let mut pi = vec![0.0; matrix.n_states()];
    let mut current = phase0;
    for kappa in 0..matrix.period_t {
        for i in 0..n1 {
            pi[kappa * n1 + i] = current[i] * scale;
        }
        if kappa + 1 < matrix.period_t {
            current = matrix.blocks[kappa].tr_mul(&current);
        }
    }
    Ok(pi)
}

/// Errors unless the chain has exactly one closed communicating class.
pub(crate) fn ensure_unique_closed_class(matrix: &TransitionMatrix) -> Result<()> {
    let closed = closed_class_count(matrix);
    if closed == 1 {
        Ok(())
    } else {
        Err(Error::ReducibleChain { closed_classes: closed })
    }
}

/// Maps a failed solve to the structural reason when there is one: several
/// closed classes mean no unique stationary vector.
fn diagnose_solve_failure(matrix: &TransitionMatrix, fallback: Error) -> Error {
    let closed = closed_class_count(matrix);
    if closed != 1 {
        Error::ReducibleChain { closed_classes: closed }
    } else {
        fallback
    }
}

/// Solves the balance and normalization equations for the unique stationary
/// distribution.
///
/// The chain must have exactly one closed communicating class; states
/// outside it (if any) receive probability zero. Chains with several closed
/// classes have no unique stationary vector and are rejected.
pub fn stationary(matrix: &TransitionMatrix) -> Result<StationaryDistribution> {
    ensure_unique_closed_class(matrix)?;
    stationary_presumed_unichain(matrix)
}

/// Stationary solve that skips the upfront class analysis.
///
/// Callers must know the positive-entry structure has a single closed class
/// (it depends only on the geometry and demand support while every pump
/// probability stays strictly inside (0, 1), so one check at a reference
/// policy covers a whole optimization run). Solver failures still get
/// diagnosed structurally.
pub(crate) fn stationary_presumed_unichain(
    matrix: &TransitionMatrix,
) -> Result<StationaryDistribution> {
    let solved = if matrix.period_t > 1 && matrix.n_states() > DENSE_LIMIT {
        solve_composite(matrix)
    } else {
        solve_full_system(matrix)
    };
    let mut pi = match solved {
        Ok(pi) => pi,
        Err(e) => return Err(diagnose_solve_failure(matrix, e)),
    };

    // Tiny negative round-off on transient states is clamped before the
    // residual check.
    for p in pi.iter_mut() {
        if *p < 0.0 {
            if *p < -1e-9 {
                return Err(diagnose_solve_failure(
                    matrix,
                    Error::Optimization(format!(
                        "stationary solve produced negative probability {p}"
                    )),
                ));
            }
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(diagnose_solve_failure(
            matrix,
            Error::Optimization("stationary solve produced a non-normalizable vector".into()),
        ));
    }
    for p in pi.iter_mut() {
        *p /= total;
    }

    let residual = balance_residual(matrix, &pi);
    if residual > STATIONARY_TOL {
        return Err(diagnose_solve_failure(
            matrix,
            Error::SolverResidual { residual, tolerance: STATIONARY_TOL },
        ));
    }

    Ok(StationaryDistribution { pi, n: matrix.n, period_t: matrix.period_t })
}

/// Closed-form stationary probability of the empty state for the
/// single-phase, constant-unit-demand, `zeta = 2` geometry with
/// `n_p = 0`, `n_s = V - 1` and a state-independent threshold.
///
/// At `F(alpha) = 1/2` the chain is a symmetric reflected walk and
/// `pi^0 = 1 / (2V)`; otherwise the value follows from cut balance with
/// ratio `F / (1 - F)`.
pub fn analytic_pi0_example1(alpha: f64, v: usize, price: &PriceModel) -> Result<f64> {
    if price.period_t != 1 {
        return Err(Error::GeometryMismatch(
            "closed-form pi0 needs a single-phase price model".into(),
        ));
    }
    if v < 2 {
        return Err(Error::GeometryMismatch(
            "closed-form pi0 needs V >= 2 so the threshold band is non-empty".into(),
        ));
    }
    let f = gaussian::cdf(alpha, price.mean[0], price.std[0]);
    if (f - 0.5).abs() <= 1e-9 {
        return Ok(1.0 / (2.0 * v as f64));
    }
    let vf = v as i32;
    let one_minus = (1.0 - f).powi(vf - 1);
    let f_pow = f.powi(vf);
    let numerator = f * (1.0 - 2.0 * f) * one_minus;
    let denominator = numerator + f_pow * (1.0 - 2.0 * f) + f * one_minus - f_pow;
    Ok(numerator / denominator)
}

/// Maximum absolute gap between empirical visit frequencies and the
/// stationary distribution.
pub fn visit_frequencies_match(
    pi: &StationaryDistribution,
    counts: &[u64],
    n_steps: u64,
) -> Result<f64> {
    if counts.len() != pi.pi.len() {
        return Err(Error::DimensionMismatch(format!(
            "visit counts have length {}, chain has {} states",
            counts.len(),
            pi.pi.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total != n_steps {
        return Err(Error::DimensionMismatch(format!(
            "visit counts sum to {total}, expected N = {n_steps}"
        )));
    }
    let n = n_steps as f64;
    Ok(counts
        .iter()
        .zip(&pi.pi)
        .map(|(c, p)| (*c as f64 / n - p).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChainSpec, PriceModel, QuantizedDemandModel, ThresholdPolicy};
    use approx::assert_relative_eq;

    fn example1(v: usize, alpha: f64) -> (QuantizedDemandModel, PriceModel, ChainSpec, ThresholdPolicy) {
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap();
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let spec = ChainSpec::new(v, 0, v - 1, 0, 2, 1.0, 1).unwrap();
        let policy = ThresholdPolicy::uniform(alpha, &spec).unwrap();
        (demand, price, spec, policy)
    }

    #[test]
    fn example1_band_rows_have_two_nonzeros() {
        let (demand, price, spec, policy) = example1(8, 20.0);
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        for i in 1..=7usize {
            let row: Vec<(usize, f64)> = (0..=8)
                .filter_map(|j| {
                    let p = chain.prob(i, 0, j);
                    (p > 0.0).then_some((j, p))
                })
                .collect();
            assert_eq!(row.len(), 2, "band row {i}");
            assert_eq!(row[0], (i - 1, 0.5));
            assert_eq!(row[1], (i + 1, 0.5));
        }
        assert_eq!(chain.prob(0, 0, 1), 1.0);
        assert_eq!(chain.prob(8, 0, 7), 1.0);
    }

    #[test]
    fn never_pump_threshold_moves_only_down() {
        let (demand, price, spec, _) = example1(8, 20.0);
        let policy = ThresholdPolicy::uniform(-1e12, &spec).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        for i in 1..=7usize {
            assert_eq!(chain.prob(i, 0, i - 1), 1.0);
            assert_eq!(chain.row_sum(i, 0), 1.0);
        }
    }

    #[test]
    fn hand_enumerated_five_state_chain() {
        // n=4, m=2 with a0=a1=0.5, zeta=2, n_p=1, n_s=2, T=1, alpha=mu.
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.5, 0.5]]).unwrap();
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let spec = ChainSpec::new(4, 1, 2, 0, 2, 1.0, 1).unwrap();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();

        let expected = [
            [0.0, 0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5, 0.0],
            [0.0, 0.25, 0.25, 0.25, 0.25],
            [0.0, 0.0, 0.5, 0.5, 0.0],
            [0.0, 0.0, 0.0, 0.5, 0.5],
        ];
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(chain.prob(i, 0, j), expected[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reducibility_detected_when_top_is_unreachable() {
        // Never pump in the band: states above the two-state bottom orbit
        // drain and cannot be re-entered.
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap();
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let spec = ChainSpec::new(4, 0, 3, 0, 2, 1.0, 1).unwrap();
        let policy = ThresholdPolicy::uniform(-1e12, &spec).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        assert!(!check_irreducible(&chain));
        // Still a unichain: the stationary vector exists and puts all mass
        // on the {0, 1} orbit.
        let pi = stationary(&chain).unwrap();
        assert_relative_eq!(pi.get(0, 0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(pi.get(1, 0), 0.5, epsilon = 1e-12);
        assert_eq!(pi.get(3, 0), 0.0);
    }

    #[test]
    fn example1_is_irreducible() {
        let (demand, price, spec, policy) = example1(8, 20.0);
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        assert!(check_irreducible(&chain));
    }

    #[test]
    fn example1_stationary_at_mean_threshold() {
        let (demand, price, spec, policy) = example1(8, 20.0);
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        assert_relative_eq!(pi.get(0, 0), 0.0625, epsilon = 1e-10);
        let total: f64 = pi.as_slice().iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn analytic_pi0_matches_numeric_solve() {
        for v in [4usize, 8, 12] {
            for alpha in [12.0, 18.0, 20.0, 25.0, 28.0] {
                let (demand, price, spec, policy) = example1(v, alpha);
                let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
                let pi = stationary(&chain).unwrap();
                let analytic = analytic_pi0_example1(alpha, v, &price).unwrap();
                assert!(
                    (pi.get(0, 0) - analytic).abs() <= 1e-9,
                    "v={v} alpha={alpha}: solve {} vs closed form {analytic}",
                    pi.get(0, 0)
                );
            }
        }
    }

    #[test]
    fn analytic_pi0_trivial_values() {
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        assert_relative_eq!(analytic_pi0_example1(20.0, 8, &price).unwrap(), 0.0625);
        assert_relative_eq!(analytic_pi0_example1(20.0, 4, &price).unwrap(), 0.125);
    }

    #[test]
    fn deterministic_two_phase_orbit_is_uniform() {
        // Constant demand 1, zeta=3, never pump in the band: the volume orbit
        // 0 -> 2 -> 1 -> 0 has period 3; with T=2 a single closed orbit of 6
        // states covers both phases, each visited with probability 1/6.
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]; 2]).unwrap();
        let price = PriceModel::new(vec![20.0, 25.0], vec![10.0, 10.0]).unwrap();
        let spec = ChainSpec::new(4, 0, 2, 0, 3, 1.0, 2).unwrap();
        let policy = ThresholdPolicy::new(vec![vec![-1e12; 2]; 2]).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        for kappa in 0..2 {
            for i in 0..3 {
                assert_relative_eq!(pi.get(i, kappa), 1.0 / 6.0, epsilon = 1e-12);
            }
            assert_eq!(pi.get(3, kappa), 0.0);
            assert_eq!(pi.get(4, kappa), 0.0);
        }
    }

    #[test]
    fn composite_and_full_solvers_agree() {
        let demand = QuantizedDemandModel::new(
            1.0,
            vec![vec![0.2, 0.5, 0.3], vec![0.1, 0.6, 0.3], vec![0.3, 0.4, 0.3]],
        )
        .unwrap();
        let price = PriceModel::new(vec![18.0, 22.0, 20.0], vec![8.0, 12.0, 10.0]).unwrap();
        let spec = ChainSpec::new(6, 1, 4, 0, 2, 1.0, 3).unwrap();
        let policy = ThresholdPolicy::new(vec![vec![21.0, 19.0, 17.0]; 3]).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let full = solve_full_system(&chain).unwrap();
        let composite = solve_composite(&chain).unwrap();
        for (a, b) in full.iter().zip(&composite) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn visit_frequency_gap() {
        let (demand, price, spec, policy) = example1(4, 20.0);
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        let n_steps = 8_000_000u64;
        let counts: Vec<u64> =
            pi.as_slice().iter().map(|p| (p * n_steps as f64).round() as u64).collect();
        let total: u64 = counts.iter().sum();
        assert_eq!(total, n_steps);
        let gap = visit_frequencies_match(&pi, &counts, n_steps).unwrap();
        assert!(gap < 1e-7, "gap {gap}");

        let mut perturbed = counts;
        perturbed[0] += 2;
        perturbed[1] -= 2;
        let gap = visit_frequencies_match(&pi, &perturbed, n_steps).unwrap();
        assert_relative_eq!(gap, 2.0 / n_steps as f64, epsilon = 1e-12);
    }

    #[test]
    fn visit_frequencies_length_mismatch() {
        let (demand, price, spec, policy) = example1(4, 20.0);
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        assert!(visit_frequencies_match(&pi, &[1, 2, 3], 6).is_err());
    }
}
