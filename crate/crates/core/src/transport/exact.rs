//! Exact solvers for the discrete Kantorovich linear program.

use std::collections::VecDeque;

use super::{check_balance, check_dimensions, Coupling, DiscreteMeasure, SolverInfo};
use crate::ground_cost::CostMatrix;
use crate::{Error, Result};

/// Largest support size accepted by [`solve_exact_brute_force`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 32;

/// Optimal coupling of `source` and `target` under `costs`.
///
/// Equal-weight problems of equal size reduce to an assignment and are solved
/// by the Hungarian method. All other instances go through the transportation
/// simplex on the bipartite graph.
pub fn solve_exact(
    costs: &CostMatrix,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
) -> Result<Coupling> {
    check_dimensions(costs, source, target)?;
    check_balance(source, target)?;
    if source.len() == target.len() && source.is_equal_weight() && target.is_equal_weight() {
        let assignment = hungarian(costs);
        let plan = assignment_plan(&assignment, source);
        return Coupling::new(
            plan,
            source.clone(),
            target.clone(),
            costs,
            SolverInfo::Hungarian,
        );
    }
    let (plan, pivots) = transportation_simplex(costs, source.weights(), target.weights());
    Coupling::new(
        plan,
        source.clone(),
        target.clone(),
        costs,
        SolverInfo::NetworkSimplex { pivots },
    )
}

/// Enumerates every permutation. Only for equal-weight supports of equal
/// size at most [`BRUTE_FORCE_MAX`].
pub fn solve_exact_brute_force(
    costs: &CostMatrix,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
) -> Result<Coupling> {
    check_dimensions(costs, source, target)?;
    let n = source.len();
    if n != target.len() || !source.is_equal_weight() || !target.is_equal_weight() {
        return Err(Error::InvalidArgument(
            "brute force needs equal-weight supports of equal size".into(),
        ));
    }
    if n > BRUTE_FORCE_MAX {
        return Err(Error::InvalidArgument(format!(
            "brute force limited to n <= {BRUTE_FORCE_MAX}, got {n}"
        )));
    }
    let value =
        |perm: &[usize]| -> f64 { perm.iter().enumerate().map(|(i, &j)| costs.get(i, j)).sum() };

    // Heap's algorithm.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_value = value(&perm);
    let mut counters = vec![0; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            let v = value(&perm);
            if v < best_value {
                best_value = v;
                best.copy_from_slice(&perm);
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    let plan = assignment_plan(&best, source);
    Coupling::new(
        plan,
        source.clone(),
        target.clone(),
        costs,
        SolverInfo::BruteForce,
    )
}

fn assignment_plan(assignment: &[usize], source: &DiscreteMeasure) -> Vec<f64> {
    let n = assignment.len();
    let mut plan = vec![0.0; n * n];
    for (i, &j) in assignment.iter().enumerate() {
        plan[i * n + j] = source.weights()[i];
    }
    plan
}

/// Minimum-cost perfect matching, `O(n³)` with row and column potentials.
/// Returns the column assigned to each row.
fn hungarian(costs: &CostMatrix) -> Vec<usize> {
    let n = costs.rows();
    // One-based with a sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = costs.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Transportation simplex: north-west corner start, node potentials,
/// Dantzig pricing, and Bland's rule during long degenerate streaks.
/// Returns the row-major plan and the number of pivots.
fn transportation_simplex(costs: &CostMatrix, supply: &[f64], demand: &[f64]) -> (Vec<f64>, usize) {
    let (m, n) = (supply.len(), demand.len());
    let mut flow = vec![0.0; m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut in_basis = vec![false; m * n];

    let mut left = supply.to_vec();
    let mut need = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let q = left[i].min(need[j]);
        flow[i * n + j] = q;
        basis.push((i, j));
        in_basis[i * n + j] = true;
        left[i] -= q;
        need[j] -= q;
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || left[i] <= need[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let tol = 1e-12 * costs.max().max(1.0);
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut pivots = 0;
    let mut degenerate = 0;
    loop {
        let tree = Tree::new(m, n, &basis);
        tree.potentials(costs, &mut u, &mut v);

        let bland = degenerate >= DEGENERATE_STREAK;
        let mut entering = None;
        let mut most_negative = -tol;
        'pricing: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let reduced = costs.get(i, j) - u[i] - v[j];
                if reduced < most_negative {
                    entering = Some((i, j));
                    if bland {
                        break 'pricing;
                    }
                    most_negative = reduced;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        // Cycle: the entering cell, then the tree path from column ej back
        // to row ei, alternately losing and gaining flow.
        let path = tree.path(m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                let (pi, pj) = basis[cell];
                let f = flow[pi * n + pj];
                let better = f < theta
                    || (f == theta && pi * n + pj < basis[leaving].0 * n + basis[leaving].1);
                if better {
                    theta = f;
                    leaving = cell;
                }
            }
        }
        for (k, &cell) in path.iter().enumerate() {
            let (pi, pj) = basis[cell];
            if k % 2 == 0 {
                flow[pi * n + pj] -= theta;
            } else {
                flow[pi * n + pj] += theta;
            }
        }
        flow[ei * n + ej] = theta;
        let (li, lj) = basis[leaving];
        flow[li * n + lj] = 0.0;
        in_basis[li * n + lj] = false;
        in_basis[ei * n + ej] = true;
        basis[leaving] = (ei, ej);

        pivots += 1;
        degenerate = if theta == 0.0 { degenerate + 1 } else { 0 };
    }
    for f in &mut flow {
        if *f < 0.0 {
            *f = 0.0;
        }
    }
    (flow, pivots)
}

/// Spanning tree of basic cells over `m` row nodes and `n` column nodes
/// (column `j` is node `m + j`).
struct Tree {
    m: usize,
    /// `(neighbour, basis index)` per node.
    adjacency: Vec<Vec<(usize, usize)>>,
    basis: Vec<(usize, usize)>,
}

impl Tree {
    fn new(m: usize, n: usize, basis: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); m + n];
        for (k, &(i, j)) in basis.iter().enumerate() {
            adjacency[i].push((m + j, k));
            adjacency[m + j].push((i, k));
        }
        Self {
            m,
            adjacency,
            basis: basis.to_vec(),
        }
    }

    /// `u_i + v_j = c_ij` on every basic cell, with `u_0 = 0`.
    fn potentials(&self, costs: &CostMatrix, u: &mut [f64], v: &mut [f64]) {
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &self.adjacency[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = self.basis[k];
                if node < self.m {
                    v[j] = costs.get(i, j) - u[i];
                } else {
                    u[i] = costs.get(i, j) - v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Basis indices along the tree path from node `from` to node `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![None; self.adjacency.len()];
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &(next, k) in &self.adjacency[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut edges = Vec::new();
        let mut node = to;
        while let Some((prev, k)) = parent[node] {
            edges.push(k);
            node = prev;
        }
        edges.reverse();
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_cost::cost_matrix;
    use crate::ground_cost::GroundCostSpec;
    use crate::transport::{sample_gaussian, GaussianSpec, MARGINAL_TOL};
    use crate::StateVec;
    use itertools::Itertools;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_costs(m: usize, n: usize, seed: u64) -> CostMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
            .collect();
        CostMatrix::from_rows(&rows).unwrap()
    }

    fn random_weights(n: usize, rng: &mut ChaCha8Rng) -> DiscreteMeasure {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        DiscreteMeasure::normalized(vec![StateVec::zeros(); n], w).unwrap()
    }

    /// Every permutation via itertools, summed in row order.
    fn permutation_oracle(costs: &CostMatrix) -> f64 {
        let n = costs.rows();
        (0..n)
            .permutations(n)
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| (1.0 / n as f64) * costs.get(i, j))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Independent LP oracle for small transportation problems: enumerate
    /// every basis of `m + n - 1` cells, keep the feasible vertices.
    fn vertex_oracle(costs: &CostMatrix, a: &[f64], b: &[f64]) -> f64 {
        let (m, n) = (a.len(), b.len());
        let cells: Vec<(usize, usize)> = (0..m).cartesian_product(0..n).collect();
        let mut best = f64::INFINITY;
        for subset in cells.iter().combinations(m + n - 1) {
            // Solve the equality system restricted to the subset by dense least squares.
            let rows = m + n;
            let cols = subset.len();
            let mut mat = nalgebra::DMatrix::<f64>::zeros(rows, cols);
            for (k, &&(i, j)) in subset.iter().enumerate() {
                mat[(i, k)] = 1.0;
                mat[(m + j, k)] = 1.0;
            }
            let rhs = nalgebra::DVector::from_iterator(rows, a.iter().chain(b).copied());
            let svd = mat.clone().svd(true, true);
            if svd.singular_values.iter().filter(|s| **s > 1e-10).count() < cols {
                continue;
            }
            let x = svd.solve(&rhs, 1e-12).unwrap();
            if (&mat * &x - &rhs).norm() > 1e-10 || x.iter().any(|v| *v < -1e-12) {
                continue;
            }
            let value: f64 = subset
                .iter()
                .zip(x.iter())
                .map(|(&&(i, j), f)| costs.get(i, j) * f)
                .sum();
            best = best.min(value);
        }
        best
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let spec = GroundCostSpec::classical(1.0).unwrap();
        let cloud = sample_gaussian(
            &GaussianSpec::diagonal(StateVec::zeros(), [1.0; 3]).unwrap(),
            7,
            3,
        )
        .unwrap();
        let costs = cost_matrix(&spec, cloud.support(), cloud.support()).unwrap();
        let c = solve_exact(&costs, &cloud, &cloud).unwrap();
        assert_eq!(c.cost(), 0.0);
        for i in 0..7 {
            assert_eq!(c.get(i, i), 1.0 / 7.0);
        }
    }

    #[test]
    fn two_point_matching() {
        let costs = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let m = DiscreteMeasure::uniform(vec![StateVec::x(), StateVec::y()]).unwrap();
        let c = solve_exact(&costs, &m, &m).unwrap();
        assert_eq!(c.plan(), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(c.cost(), 0.0);
    }

    #[test]
    fn hungarian_matches_brute_force() {
        for seed in 0..30 {
            let n = 2 + (seed as usize % 6);
            let costs = random_costs(n, n, seed);
            let m = DiscreteMeasure::uniform(vec![StateVec::zeros(); n]).unwrap();
            let exact = solve_exact(&costs, &m, &m).unwrap();
            let brute = solve_exact_brute_force(&costs, &m, &m).unwrap();
            assert_eq!(exact.cost(), brute.cost(), "seed {seed}");
            assert_eq!(exact.cost(), permutation_oracle(&costs), "seed {seed}");
        }
    }

    #[test]
    fn simplex_matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..15 {
            let (m, n) = (2 + seed % 3, 2 + (seed / 3) % 3);
            let costs = random_costs(m, n, 100 + seed as u64);
            let a = random_weights(m, &mut rng);
            let b = random_weights(n, &mut rng);
            let c = solve_exact(&costs, &a, &b).unwrap();
            assert!(matches!(c.solver(), SolverInfo::NetworkSimplex { .. }));
            let oracle = vertex_oracle(&costs, a.weights(), b.weights());
            assert!(
                (c.cost() - oracle).abs() <= 1e-12,
                "seed {seed}: {} vs {oracle}",
                c.cost()
            );
            assert!(c.row_residual() <= MARGINAL_TOL);
            assert!(c.col_residual() <= MARGINAL_TOL);
        }
    }

    #[test]
    fn simplex_agrees_with_hungarian_on_assignments() {
        let n = 12;
        let costs = random_costs(n, n, 5);
        let m = DiscreteMeasure::uniform(vec![StateVec::zeros(); n]).unwrap();
        let hung = solve_exact(&costs, &m, &m).unwrap();
        let (plan, _) = transportation_simplex(&costs, m.weights(), m.weights());
        let simplex: f64 = plan.iter().zip(costs.entries()).map(|(p, c)| p * c).sum();
        assert!((hung.cost() - simplex).abs() <= 1e-12);
    }

    #[test]
    fn degenerate_supplies() {
        // Equal partial sums force degenerate pivots.
        let a = DiscreteMeasure::new(vec![StateVec::zeros(); 4], vec![0.25; 4]).unwrap();
        let b = DiscreteMeasure::new(vec![StateVec::zeros(); 2], vec![0.5, 0.5]).unwrap();
        let costs = CostMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let c = solve_exact(&costs, &a, &b).unwrap();
        assert_eq!(c.cost(), 0.0);
        assert!(c.col_residual() <= MARGINAL_TOL);
    }

    #[test]
    fn mismatched_mass_is_rejected() {
        let costs = CostMatrix::from_rows(&[vec![0.0]]).unwrap();
        let a = DiscreteMeasure::dirac(StateVec::zeros()).unwrap();
        let wide = CostMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_exact(&wide, &a, &a),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(solve_exact(&costs, &a, &a).is_ok());
        let big = DiscreteMeasure::uniform(vec![StateVec::zeros(); 9]).unwrap();
        let costs9 = random_costs(9, 9, 1);
        assert!(solve_exact_brute_force(&costs9, &big, &big).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_couplings_are_feasible(m in 1usize..8, n in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let costs = random_costs(m, n, seed);
            let a = random_weights(m, &mut rng);
            let b = random_weights(n, &mut rng);
            let c = solve_exact(&costs, &a, &b).unwrap();
            prop_assert!(c.row_residual() <= MARGINAL_TOL);
            prop_assert!(c.col_residual() <= MARGINAL_TOL);
            prop_assert!(c.plan().iter().all(|p| *p >= 0.0));
            let product = crate::transport::Coupling::product(a, b, &costs).unwrap();
            prop_assert!(c.cost() <= product.cost() + 1e-12);
        }

        #[test]
        fn hungarian_is_optimal_up_to_six(n in 1usize..=6, seed in any::<u64>()) {
            let costs = random_costs(n, n, seed);
            let m = DiscreteMeasure::uniform(vec![StateVec::zeros(); n]).unwrap();
            let c = solve_exact(&costs, &m, &m).unwrap();
            prop_assert_eq!(c.cost(), solve_exact_brute_force(&costs, &m, &m).unwrap().cost());
        }
    }
}
