//! Weighted parametric fits: `argmin_θ Σ_i w_i δ(f_i, θᵀ c(i))`.
//!
//! Squared L2 is solved exactly through the weighted normal equations. The
//! L2 and L1 norms are solved by iteratively reweighted least squares, which
//! is a majorize-minimize scheme for the ε-smoothed (Huber-like) objective:
//! each reweighted step can only lower it.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::linalg::{Cholesky, SymMatrix};
use crate::model::{eval_at, BasisTable, DistanceKind, ModelKind};
use crate::scalar::Scalar;
use crate::sum::{neumaier_sum, NeumaierSum};

/// Backend for the robust (non-quadratic) distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum RobustSolver {
    #[default]
    Irls,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Tikhonov term added to the Gram diagonal.
    pub ridge: T,
    /// Residual floor in the IRLS reweighting.
    pub irls_eps: T,
    /// Relative parameter-change threshold that stops IRLS.
    pub irls_tol: T,
    pub irls_max_iter: usize,
    /// A fit needs `Σ w_i >= min_weight_factor * parameter_count`.
    pub min_weight_factor: T,
    pub solver: RobustSolver,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            ridge: T::lit(1e-9),
            irls_eps: T::lit(1e-6),
            irls_tol: T::lit(1e-8),
            irls_max_iter: 50,
            min_weight_factor: T::lit(10.0),
            solver: RobustSolver::Irls,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<T> {
    pub theta: Vec<T>,
    /// Reweighted solves performed (0 for squared L2).
    pub iterations: usize,
    /// ε-smoothed objective at the starting point and after each solve.
    pub objective_trace: Vec<T>,
}

/// Weighted fit of one parameter row.
pub fn fit_weighted<T: Scalar>(
    f: &FlowField<T>,
    weights: &[T],
    kind: ModelKind,
    dist: DistanceKind,
    opts: &FitOptions<T>,
) -> Result<Vec<T>> {
    let table = BasisTable::new(kind, f.dims());
    fit_with_table(&table, f.vectors(), weights, dist, opts, None, false).map(|r| r.theta)
}

/// Like [`fit_weighted`], optionally warm-starting IRLS from `start`, and
/// reporting the objective trace.
pub fn fit_weighted_report<T: Scalar>(
    f: &FlowField<T>,
    weights: &[T],
    kind: ModelKind,
    dist: DistanceKind,
    opts: &FitOptions<T>,
    start: Option<&[T]>,
) -> Result<FitReport<T>> {
    let table = BasisTable::new(kind, f.dims());
    fit_with_table(&table, f.vectors(), weights, dist, opts, start, true)
}

pub(crate) fn fit_with_table<T: Scalar>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    weights: &[T],
    dist: DistanceKind,
    opts: &FitOptions<T>,
    start: Option<&[T]>,
    record: bool,
) -> Result<FitReport<T>> {
    let sites = table.sites();
    assert_eq!(flow.len(), sites, "flow/grid size mismatch");
    if weights.len() != sites {
        return Err(Error::DimMismatch {
            expected: table.grid(),
            found: (weights.len(), 1),
        });
    }
    let p = table.kind().parameter_count();
    let total = neumaier_sum(weights.iter().copied());
    let required = opts.min_weight_factor * T::from_usize_lossy(p);
    if !(total > T::zero()) || total < required {
        return Err(Error::DegenerateWeights {
            total: total.as_f64(),
            required: required.as_f64(),
        });
    }

    let ls = || solve_weighted(table, flow, |i| [weights[i]; 2], opts.ridge);
    if dist == DistanceKind::SquaredL2 {
        let theta = ls()?;
        let objective_trace = if record {
            vec![smoothed_objective(table, flow, weights, &theta, dist, opts.irls_eps)]
        } else {
            Vec::new()
        };
        return Ok(FitReport {
            theta,
            iterations: 0,
            objective_trace,
        });
    }

    match opts.solver {
        RobustSolver::Irls => {}
    }
    let mut theta = match start {
        Some(s) => {
            assert_eq!(s.len(), p, "start row length");
            s.to_vec()
        }
        None => ls()?,
    };
    let eps = opts.irls_eps;
    let mut trace = Vec::new();
    if record {
        trace.push(smoothed_objective(table, flow, weights, &theta, dist, eps));
    }
    let mut iterations = 0;
    let mut residuals = vec![[T::zero(); 2]; sites];
    while iterations < opts.irls_max_iter {
        for (i, r) in residuals.iter_mut().enumerate() {
            let m = eval_at(&theta, table.row(i));
            *r = [flow[i][0] - m[0], flow[i][1] - m[1]];
        }
        let next = match dist {
            DistanceKind::L2Norm => solve_weighted(
                table,
                flow,
                |i| {
                    let w = weights[i] / residuals[i][0].hypot(residuals[i][1]).max(eps);
                    [w, w]
                },
                opts.ridge,
            )?,
            DistanceKind::L1Norm => solve_weighted(
                table,
                flow,
                |i| {
                    [
                        weights[i] / residuals[i][0].abs().max(eps),
                        weights[i] / residuals[i][1].abs().max(eps),
                    ]
                },
                opts.ridge,
            )?,
            DistanceKind::SquaredL2 => unreachable!(),
        };
        iterations += 1;
        let change = norm(theta.iter().zip(&next).map(|(a, b)| *a - *b));
        let scale = norm(next.iter().copied()).max(T::one());
        theta = next;
        if record {
            trace.push(smoothed_objective(table, flow, weights, &theta, dist, eps));
        }
        if change <= opts.irls_tol * scale {
            break;
        }
    }
    Ok(FitReport {
        theta,
        iterations,
        objective_trace: trace,
    })
}

fn norm<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    it.map(|x| x * x).sum::<T>().sqrt()
}

const BLOCK: usize = 256;

/// Solves the weighted normal equations with per-component site weights.
fn solve_weighted<T: Scalar>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    weight: impl Fn(usize) -> [T; 2],
    ridge: T,
) -> Result<Vec<T>> {
    match table.kind().basis_len() {
        3 => solve_fixed::<T, 3>(table, flow, weight, ridge),
        6 => solve_fixed::<T, 6>(table, flow, weight, ridge),
        n => unreachable!("basis length {n}"),
    }
}

fn solve_fixed<T: Scalar, const N: usize>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    weight: impl Fn(usize) -> [T; 2],
    ridge: T,
) -> Result<Vec<T>> {
    let mut acc = [GramAccumulator::new(N), GramAccumulator::new(N)];
    let mut block = [GramBlock::<T, N>::new(), GramBlock::new()];
    let mut shared = true;
    for (i, row) in table.rows().enumerate() {
        let c: &[T; N] = row.try_into().expect("basis row length");
        let w = weight(i);
        shared &= w[0] == w[1];
        for comp in 0..2 {
            if w[comp] != T::zero() {
                block[comp].add(w[comp], c, flow[i][comp]);
            }
        }
        if (i + 1) % BLOCK == 0 {
            for comp in 0..2 {
                acc[comp].absorb(&mut block[comp]);
            }
        }
    }
    for comp in 0..2 {
        acc[comp].absorb(&mut block[comp]);
    }
    let mut theta = Vec::with_capacity(2 * N);
    if shared {
        let (gram, rhs_u) = acc[0].finish(ridge);
        let (_, rhs_v) = acc[1].finish(ridge);
        let chol = Cholesky::factor(&gram)?;
        theta.extend(chol.solve(&rhs_u));
        theta.extend(chol.solve(&rhs_v));
    } else {
        for a in &acc {
            let (gram, rhs) = a.finish(ridge);
            theta.extend(Cholesky::factor(&gram)?.solve(&rhs));
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(theta)
}

/// Partial sums over one block of sites (upper triangle only).
struct GramBlock<T, const N: usize> {
    gram: [[T; N]; N],
    rhs: [T; N],
}

impl<T: Scalar, const N: usize> GramBlock<T, N> {
    fn new() -> Self {
        Self {
            gram: [[T::zero(); N]; N],
            rhs: [T::zero(); N],
        }
    }

    #[inline]
    fn add(&mut self, w: T, c: &[T; N], target: T) {
        let wt = w * target;
        for r in 0..N {
            let wc = w * c[r];
            for col in r..N {
                self.gram[r][col] += wc * c[col];
            }
            self.rhs[r] += wt * c[r];
        }
    }
}

/// Compensated sum of per-block partial Gram matrices.
struct GramAccumulator<T> {
    n: usize,
    gram: Vec<NeumaierSum<T>>,
    rhs: Vec<NeumaierSum<T>>,
}

impl<T: Scalar> GramAccumulator<T> {
    fn new(n: usize) -> Self {
        Self {
            n,
            gram: vec![NeumaierSum::new(); n * n],
            rhs: vec![NeumaierSum::new(); n],
        }
    }

    fn absorb<const N: usize>(&mut self, block: &mut GramBlock<T, N>) {
        for r in 0..N {
            for c in r..N {
                self.gram[r * N + c].add(block.gram[r][c]);
            }
            self.rhs[r].add(block.rhs[r]);
        }
        *block = GramBlock::new();
    }

    fn finish(&self, ridge: T) -> (SymMatrix<T>, Vec<T>) {
        let mut g = SymMatrix::zeros(self.n);
        for r in 0..self.n {
            for c in r..self.n {
                g.set(r, c, self.gram[r * self.n + c].value());
            }
        }
        g.symmetrize();
        g.add_diagonal(ridge);
        (g, self.rhs.iter().map(NeumaierSum::value).collect())
    }
}

/// `Σ_i w_i δ(f_i, θᵀ c(i))`.
pub fn weighted_objective<T: Scalar>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    weights: &[T],
    theta: &[T],
    dist: DistanceKind,
) -> T {
    neumaier_sum(
        table
            .rows()
            .zip(flow)
            .zip(weights)
            .filter(|(_, w)| **w != T::zero())
            .map(|((c, f), w)| *w * dist.distance(*f, eval_at(theta, c))),
    )
}

/// The objective IRLS actually decreases: norms are replaced by the Huber
/// function `r²/(2ε) + ε/2` below `ε`. Identical to the plain objective for
/// squared L2.
pub fn smoothed_objective<T: Scalar>(
    table: &BasisTable<T>,
    flow: &[[T; 2]],
    weights: &[T],
    theta: &[T],
    dist: DistanceKind,
    eps: T,
) -> T {
    let half = T::lit(0.5);
    let huber = |r: T| {
        if r >= eps {
            r
        } else {
            r * r / (eps + eps) + eps * half
        }
    };
    neumaier_sum(
        table
            .rows()
            .zip(flow)
            .zip(weights)
            .filter(|(_, w)| **w != T::zero())
            .map(|((c, f), w)| {
                let m = eval_at(theta, c);
                let (du, dv) = (f[0] - m[0], f[1] - m[1]);
                let d = match dist {
                    DistanceKind::SquaredL2 => du * du + dv * dv,
                    DistanceKind::L2Norm => huber(du.hypot(dv)),
                    DistanceKind::L1Norm => huber(du.abs()) + huber(dv.abs()),
                };
                *w * d
            }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::render_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const KINDS: [DistanceKind; 3] = [DistanceKind::SquaredL2, DistanceKind::L2Norm, DistanceKind::L1Norm];

    fn random_theta(rng: &mut ChaCha8Rng, kind: ModelKind) -> Vec<f64> {
        (0..kind.parameter_count()).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn constant_flow_recovers_translation() {
        let f = FlowField::<f64>::from_fn(20, 15, |_, _| [0.75, -1.25]);
        let w = vec![1.0; f.len()];
        for kind in [ModelKind::Affine, ModelKind::FullQuadratic] {
            for dist in KINDS {
                let theta = fit_weighted(&f, &w, kind, dist, &FitOptions::default()).unwrap();
                let n = kind.basis_len();
                assert!((theta[0] - 0.75).abs() < 1e-9, "{dist}: {theta:?}");
                assert!((theta[n] + 1.25).abs() < 1e-9, "{dist}: {theta:?}");
                for (j, t) in theta.iter().enumerate() {
                    if j != 0 && j != n {
                        assert!(t.abs() < 1e-9, "{kind} {dist}: {theta:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn render_then_fit_recovers_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [ModelKind::Affine, ModelKind::FullQuadratic] {
            let truth = random_theta(&mut rng, kind);
            let f = render_model(&truth, kind, (33, 21));
            let w: Vec<f64> = (0..f.len()).map(|_| rng.random_range(0.1..1.0)).collect();
            let theta = fit_weighted(&f, &w, kind, DistanceKind::SquaredL2, &FitOptions::default()).unwrap();
            let rms = (theta.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64).sqrt();
            assert!(rms < 1e-6, "rms {rms}");
        }
    }

    #[test]
    fn l1_resists_outliers_squared_l2_shifts_by_weighted_mean() {
        let (w, h) = (40, 30);
        let (u0, v0) = (1.0, -0.5);
        let mut f = FlowField::<f64>::from_fn(w, h, |_, _| [u0, v0]);
        let n = f.len();
        let mut outliers = 0;
        for (i, v) in f.vectors_mut().iter_mut().enumerate() {
            if i % 10 == 3 {
                *v = [u0 + 25.0, v0 - 40.0];
                outliers += 1;
            }
        }
        let weights = vec![1.0; n];
        let kind = ModelKind::Affine;
        let opts = FitOptions::default();
        let l1 = fit_weighted(&f, &weights, kind, DistanceKind::L1Norm, &opts).unwrap();
        assert!((l1[0] - u0).abs() < 1e-3 && (l1[3] - v0).abs() < 1e-3, "{l1:?}");

        // Translation-only oracle: the weighted mean of the observations.
        let frac = outliers as f64 / n as f64;
        let ls = fit_weighted(&f, &weights, kind, DistanceKind::SquaredL2, &opts).unwrap();
        let table = BasisTable::<f64>::new(kind, (w, h));
        let mean_shift_u = 25.0 * frac;
        // The affine fit also tilts toward outliers; its prediction averaged
        // over the grid still equals the weighted mean.
        let avg_u: f64 = table.rows().map(|c| eval_at(&ls, c)[0]).sum::<f64>() / n as f64;
        assert!((avg_u - (u0 + mean_shift_u)).abs() < 1e-9, "{avg_u}");
        assert!((ls[0] - u0).abs() > 0.1);
    }

    #[test]
    fn squared_l2_is_global_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kind = ModelKind::FullQuadratic;
        let f = FlowField::<f64>::from_fn(25, 18, |_, _| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
        let w: Vec<f64> = (0..f.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let table = BasisTable::new(kind, f.dims());
        let theta = fit_weighted(&f, &w, kind, DistanceKind::SquaredL2, &FitOptions::default()).unwrap();
        let best = weighted_objective(&table, f.vectors(), &w, &theta, DistanceKind::SquaredL2);
        for _ in 0..100 {
            let scale = 10f64.powf(rng.random_range(-6.0..0.0));
            let pert: Vec<f64> = theta.iter().map(|t| t + scale * rng.random_range(-1.0..1.0)).collect();
            let obj = weighted_objective(&table, f.vectors(), &w, &pert, DistanceKind::SquaredL2);
            assert!(best <= obj, "{best} > {obj}");
        }
    }

    #[test]
    fn irls_objective_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kind = ModelKind::FullQuadratic;
        for dist in [DistanceKind::L2Norm, DistanceKind::L1Norm] {
            for _ in 0..5 {
                let truth = random_theta(&mut rng, kind);
                let mut f = render_model(&truth, kind, (30, 20));
                for v in f.vectors_mut() {
                    if rng.random_bool(0.2) {
                        *v = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
                    } else {
                        v[0] += rng.random_range(-0.05..0.05);
                        v[1] += rng.random_range(-0.05..0.05);
                    }
                }
                let w: Vec<f64> = (0..f.len()).map(|_| rng.random_range(0.0..1.0)).collect();
                let start = random_theta(&mut rng, kind);
                let report = fit_weighted_report(&f, &w, kind, dist, &FitOptions::default(), Some(&start)).unwrap();
                assert!(report.iterations >= 1);
                for pair in report.objective_trace.windows(2) {
                    assert!(pair[1] <= pair[0] + 1e-10, "{dist}: {} -> {}", pair[0], pair[1]);
                }
            }
        }
    }

    #[test]
    fn shift_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let kind = ModelKind::FullQuadratic;
        let grid = (24, 16);
        let f = FlowField::<f64>::from_fn(grid.0, grid.1, |_, _| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        let w: Vec<f64> = (0..f.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let zeta = random_theta(&mut rng, kind);
        let shifted = f.add(&render_model(&zeta, kind, grid)).unwrap();
        for (dist, tol) in [(DistanceKind::SquaredL2, 1e-9), (DistanceKind::L1Norm, 1e-4), (DistanceKind::L2Norm, 1e-4)] {
            let a = fit_weighted(&f, &w, kind, dist, &FitOptions::default()).unwrap();
            let b = fit_weighted(&shifted, &w, kind, dist, &FitOptions::default()).unwrap();
            for j in 0..a.len() {
                assert!((b[j] - a[j] - zeta[j]).abs() < tol, "{dist} j={j}: {} vs {}", b[j] - a[j], zeta[j]);
            }
        }
    }

    #[test]
    fn degenerate_and_mismatched_weights() {
        let f = FlowField::<f64>::zeros(10, 10);
        let zero = vec![0.0; 100];
        assert!(matches!(
            fit_weighted(&f, &zero, ModelKind::Affine, DistanceKind::SquaredL2, &FitOptions::default()),
            Err(Error::DegenerateWeights { .. })
        ));
        // 100 sites carry less than 10 * 12 weight
        let ones = vec![1.0; 100];
        assert!(matches!(
            fit_weighted(&f, &ones, ModelKind::FullQuadratic, DistanceKind::SquaredL2, &FitOptions::default()),
            Err(Error::DegenerateWeights { .. })
        ));
        assert!(fit_weighted(&f, &ones, ModelKind::Affine, DistanceKind::SquaredL2, &FitOptions::default()).is_ok());
        assert!(matches!(
            fit_weighted(&f, &ones[..50], ModelKind::Affine, DistanceKind::SquaredL2, &FitOptions::default()),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn single_row_grid_is_regularized() {
        // y is constant on a one-row grid; the ridge keeps the system definite.
        let f = FlowField::<f64>::from_fn(80, 1, |x, _| [x as f64 * 0.01, 0.0]);
        let w = vec![1.0; 80];
        let theta = fit_weighted(&f, &w, ModelKind::Affine, DistanceKind::SquaredL2, &FitOptions::default()).unwrap();
        assert!(theta.iter().all(|t| t.is_finite()));
        assert!((theta[0] - 0.395).abs() < 1e-6);
    }

    #[test]
    fn works_in_single_precision() {
        let truth = [0.5f32, 0.1, -0.2, 0.0, 0.0, 0.0, -1.0, 0.3, 0.05, 0.0, 0.0, 0.0];
        let f = render_model(&truth, ModelKind::FullQuadratic, (40, 30));
        let w = vec![1.0f32; f.len()];
        let theta = fit_weighted(&f, &w, ModelKind::FullQuadratic, DistanceKind::SquaredL2, &FitOptions::default()).unwrap();
        for (a, b) in theta.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-3);
        }
    }
}
