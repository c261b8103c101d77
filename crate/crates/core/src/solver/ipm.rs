//! Primal-dual interior-point method with Mehrotra predictor-corrector.
//!
//! Solves the pair
//!
//! > (P) minimize `c^T x` subject to `S(x) = sum_k x_k F_k - G >= 0`
//! > (D) maximize `tr(G Z)` subject to `tr(F_k Z) = c_k`, `Z >= 0`
//!
//! from an infeasible start. Search directions linearize `S Z = sigma mu I`
//! after eliminating `dZ`, leaving one Schur system
//! `B dx = r` with `B_kl = tr(F_k S^{-1} F_l Z)`, which is symmetric
//! positive definite since it is the Gram matrix of the `F_k` under the
//! inner product induced by `Z (x) S^{-1}`. The recovered `dZ` is
//! symmetrized, which keeps the equality constraints satisfied exactly.
//!
//! Variables carry two blocks: a dense semidefinite block and a diagonal
//! block, so linear inequality rows ride along as diagonal slacks.

use super::sparse::BlockMatrix;
use super::{SdpProblem, SdpSolution, SolverOptions, SolverStatus};
use crate::error::{Error, Result};
use faer::prelude::Solve;
use faer::{Mat, Side};

/// One block-pair iterate (dense symmetric + diagonal).
#[derive(Clone)]
struct BlockVar {
    mat: Mat<f64>,
    diag: Vec<f64>,
}

impl BlockVar {
    fn scaled_identity(s: usize, l: usize, rho: f64) -> BlockVar {
        BlockVar {
            mat: Mat::from_fn(s, s, |i, j| if i == j { rho } else { 0.0 }),
            diag: vec![rho; l],
        }
    }

    fn zeros(s: usize, l: usize) -> BlockVar {
        BlockVar {
            mat: Mat::zeros(s, s),
            diag: vec![0.0; l],
        }
    }

    fn inner(&self, other: &BlockVar) -> f64 {
        let s = self.mat.nrows();
        let mut acc = 0.0;
        for j in 0..s {
            for i in 0..s {
                acc += self.mat[(i, j)] * other.mat[(i, j)];
            }
        }
        for (a, b) in self.diag.iter().zip(&other.diag) {
            acc += a * b;
        }
        acc
    }

    fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, other: &BlockVar) {
        let s = self.mat.nrows();
        for j in 0..s {
            for i in 0..s {
                self.mat[(i, j)] += alpha * other.mat[(i, j)];
            }
        }
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += alpha * b;
        }
    }
}

/// Lower Cholesky factor, or None when not positive definite.
fn cholesky_lower(a: &Mat<f64>) -> Option<Mat<f64>> {
    let n = a.nrows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            l[(i, j)] = a[(i, j)];
        }
    }
    for j in 0..n {
        for k in 0..j {
            let ljk = l[(j, k)];
            if ljk != 0.0 {
                for i in j..n {
                    l[(i, j)] -= l[(i, k)] * ljk;
                }
            }
        }
        let d = l[(j, j)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let r = d.sqrt();
        l[(j, j)] = r;
        for i in j + 1..n {
            l[(i, j)] /= r;
        }
    }
    Some(l)
}

/// `m <- L^{-1} m`, column by column.
fn solve_lower_in_place(l: &Mat<f64>, m: &mut Mat<f64>) {
    let n = l.nrows();
    for c in 0..m.ncols() {
        for k in 0..n {
            let v = m[(k, c)] / l[(k, k)];
            m[(k, c)] = v;
            if v != 0.0 {
                for i in k + 1..n {
                    m[(i, c)] -= l[(i, k)] * v;
                }
            }
        }
    }
}

/// `m <- L^{-T} m`, column by column.
fn solve_lower_transposed_in_place(l: &Mat<f64>, m: &mut Mat<f64>) {
    let n = l.nrows();
    for c in 0..m.ncols() {
        for k in (0..n).rev() {
            let mut v = m[(k, c)];
            for i in k + 1..n {
                v -= l[(i, k)] * m[(i, c)];
            }
            m[(k, c)] = v / l[(k, k)];
        }
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub(crate) fn min_eigenvalue(m: &Mat<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let mut min = f64::INFINITY;
    for k in 0..m.nrows() {
        min = min.min(s[k]);
    }
    Ok(min)
}

/// Largest `alpha` with `V + alpha dV >= 0`, via the smallest eigenvalue of
/// `L^{-1} dM L^{-T}` on the dense block and ratio tests on the diagonal.
fn step_to_boundary(l: &Mat<f64>, v: &BlockVar, dv: &BlockVar) -> Result<f64> {
    let mut bound = f64::INFINITY;
    if v.mat.nrows() > 0 {
        let mut w = dv.mat.clone();
        solve_lower_in_place(l, &mut w);
        let mut wt = w.transpose().to_owned();
        solve_lower_in_place(l, &mut wt);
        symmetrize(&mut wt);
        let lam = min_eigenvalue(&wt)?;
        if lam < -1e-13 {
            bound = bound.min(-1.0 / lam);
        }
    }
    for (xk, dk) in v.diag.iter().zip(&dv.diag) {
        if *dk < 0.0 {
            bound = bound.min(-xk / dk);
        }
    }
    Ok(bound)
}

/// Dense-block buffers for the Schur assembly, row-major and symmetric.
struct DenseSym {
    n: usize,
    buf: Vec<f64>,
}

impl DenseSym {
    fn from_mat(m: &Mat<f64>) -> DenseSym {
        let n = m.nrows();
        let mut buf = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                buf[i * n + j] = m[(i, j)];
            }
        }
        DenseSym { n, buf }
    }
}

/// `B_kl = tr(F_k S^{-1} F_l Z)` plus the diagonal-block contributions
/// `sum_t f_k[t] f_l[t] z[t] / s[t]`. Fills the upper triangle and mirrors.
fn form_schur(
    b: &mut Mat<f64>,
    cons: &[(BlockMatrix, f64)],
    si: &DenseSym,
    z: &DenseSym,
    slack_diag: &[f64],
    z_diag: &[f64],
    lp_index: &[Vec<(u32, f64)>],
) {
    let m = cons.len();
    let n = si.n;
    for j in 0..m {
        for i in 0..=j {
            b[(i, j)] = 0.0;
        }
    }
    for k in 0..m {
        let fk = cons[k].0.sdp.expanded();
        if fk.is_empty() {
            continue;
        }
        for l in k..m {
            let fl = cons[l].0.sdp.expanded();
            if fl.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for &(p, q, u) in fk {
                // Both buffers are symmetric, so row p of Z stands in for
                // column p and both inner lookups walk rows contiguously.
                let si_row = &si.buf[q as usize * n..q as usize * n + n];
                let z_row = &z.buf[p as usize * n..p as usize * n + n];
                let mut t_acc = 0.0;
                for &(r, t, v) in fl {
                    t_acc += v * si_row[r as usize] * z_row[t as usize];
                }
                acc += u * t_acc;
            }
            b[(k, l)] += acc;
        }
    }
    for (t, touching) in lp_index.iter().enumerate() {
        if touching.is_empty() {
            continue;
        }
        let w = z_diag[t] / slack_diag[t];
        for (a, &(k, fk)) in touching.iter().enumerate() {
            for &(l, fl) in &touching[a..] {
                b[(k as usize, l as usize)] += fk * fl * w;
            }
        }
    }
    for j in 0..m {
        for i in 0..j {
            b[(j, i)] = b[(i, j)];
        }
    }
}

/// `tr(F M) + sum_t f[t] d[t]` where `M` need not be symmetric.
fn block_inner_general(f: &BlockMatrix, m: &Mat<f64>, d: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &(p, q, v) in f.sdp.expanded() {
        acc += v * m[(q as usize, p as usize)];
    }
    for &(k, v) in &f.lp {
        acc += v * d[k as usize];
    }
    acc
}

struct Residuals {
    /// `P = S(x) - X` per block.
    p: BlockVar,
    /// `d_k = c_k - <F_k, Z>`.
    d: Vec<f64>,
    pobj: f64,
    dobj: f64,
    pfeas: f64,
    dfeas: f64,
    gap: f64,
}

fn residuals(
    problem: &SdpProblem,
    x: &[f64],
    slack: &BlockVar,
    z: &BlockVar,
    norm_g: f64,
    norm_c: f64,
) -> Residuals {
    let (s, l) = (problem.sdp_dim, problem.lp_dim);
    let mut p = BlockVar::zeros(s, l);
    problem
        .objective
        .add_scaled_to(&mut p.mat, &mut p.diag, -1.0);
    for (k, (f, _)) in problem.constraints.iter().enumerate() {
        if x[k] != 0.0 {
            f.add_scaled_to(&mut p.mat, &mut p.diag, x[k]);
        }
    }
    p.axpy(-1.0, slack);
    let d: Vec<f64> = problem
        .constraints
        .iter()
        .map(|(f, c)| c - f.inner(&z.mat, &z.diag))
        .collect();
    let pobj: f64 = problem
        .constraints
        .iter()
        .zip(x)
        .map(|((_, c), xk)| c * xk)
        .sum();
    let dobj = problem.objective.inner(&z.mat, &z.diag);
    let pfeas = p.norm() / (1.0 + norm_g);
    let dfeas = d.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + norm_c);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Residuals {
        p,
        d,
        pobj,
        dobj,
        pfeas,
        dfeas,
        gap,
    }
}

pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let (s, l, m) = (problem.sdp_dim, problem.lp_dim, problem.m());
    let total_dim = (s + l) as f64;
    let norm_g = problem.objective.frob_norm();
    let norm_c = problem
        .constraints
        .iter()
        .map(|(_, c)| c * c)
        .sum::<f64>()
        .sqrt();
    let max_f = problem
        .constraints
        .iter()
        .map(|(f, _)| f.frob_norm())
        .fold(0.0f64, f64::max);

    let rho_x = 10.0 * (1.0f64).max(norm_g).max(max_f);
    let rho_z = 10.0 * (1.0f64).max(norm_c / (1.0f64).max(max_f));
    let mut x = vec![0.0; m];
    let mut slack = BlockVar::scaled_identity(s, l, rho_x);
    let mut z = BlockVar::scaled_identity(s, l, rho_z);

    // Transpose map of the diagonal-block entries: per index, which
    // constraints touch it.
    let mut lp_index: Vec<Vec<(u32, f64)>> = vec![Vec::new(); l];
    for (k, (f, _)) in problem.constraints.iter().enumerate() {
        for &(t, v) in &f.lp {
            lp_index[t as usize].push((k as u32, v));
        }
    }

    let mut b = Mat::zeros(m, m);
    let mut stalls = 0usize;
    let mut res = residuals(problem, &x, &slack, &z, norm_g, norm_c);

    for iter in 0..options.max_iterations {
        if options.verbose {
            eprintln!(
                "  it {iter:3}  pobj {:+.9e}  dobj {:+.9e}  gap {:.2e}  pfeas {:.2e}  dfeas {:.2e}",
                res.pobj, res.dobj, res.gap, res.pfeas, res.dfeas
            );
        }
        if res.gap <= options.tol_gap
            && res.pfeas <= options.tol_feas
            && res.dfeas <= options.tol_feas
        {
            return Ok(finish(SolverStatus::Optimal, x, slack, z, res, iter));
        }
        let scale = 1.0 + norm_g + norm_c;
        if res.pobj < -options.unbounded_threshold * scale && res.pfeas < 1e-4 {
            return Ok(finish_primal_unbounded(problem, x, slack, z, res, iter));
        }
        if res.dobj > options.unbounded_threshold * scale && res.dfeas < 1e-4 {
            return Ok(finish_dual_unbounded(problem, x, slack, z, res, iter));
        }

        let mu = (slack.inner(&z)) / total_dim;
        let l_slack = match cholesky_lower(&slack.mat) {
            Some(l) => l,
            None => return Ok(finish(SolverStatus::IllConditioned, x, slack, z, res, iter)),
        };
        let l_z = match cholesky_lower(&z.mat) {
            Some(l) => l,
            None => return Ok(finish(SolverStatus::IllConditioned, x, slack, z, res, iter)),
        };
        // S^{-1} dense, then row-major buffers for the Schur assembly.
        let mut si_mat = Mat::<f64>::identity(s, s);
        solve_lower_in_place(&l_slack, &mut si_mat);
        solve_lower_transposed_in_place(&l_slack, &mut si_mat);
        symmetrize(&mut si_mat);
        let si = DenseSym::from_mat(&si_mat);
        let zbuf = DenseSym::from_mat(&z.mat);

        form_schur(
            &mut b,
            &problem.constraints,
            &si,
            &zbuf,
            &slack.diag,
            &z.diag,
            &lp_index,
        );
        let b_factor = match factor_with_jitter(&mut b) {
            Some(f) => f,
            None => return Ok(finish(SolverStatus::IllConditioned, x, slack, z, res, iter)),
        };

        // T2 = S^{-1} P Z and its diagonal-block analogue, shared by both
        // right-hand sides.
        let t2 = &si_mat * &(&res.p.mat * &z.mat);
        let t2_diag: Vec<f64> = (0..l)
            .map(|k| res.p.diag[k] * z.diag[k] / slack.diag[k])
            .collect();

        // Predictor: R = -S Z makes tr(F_k S^{-1} R) - d_k collapse to -c_k.
        let rhs_aff = Mat::from_fn(m, 1, |k, _| {
            -problem.constraints[k].1 - block_inner_general(&problem.constraints[k].0, &t2, &t2_diag)
        });
        let dx_aff = b_factor.solve(&rhs_aff);
        let mut dslack_aff = res.p.clone();
        for k in 0..m {
            let v = dx_aff[(k, 0)];
            if v != 0.0 {
                problem.constraints[k]
                    .0
                    .add_scaled_to(&mut dslack_aff.mat, &mut dslack_aff.diag, v);
            }
        }
        let w_aff = &si_mat * &(&dslack_aff.mat * &z.mat);
        let mut dz_aff = BlockVar {
            mat: Mat::from_fn(s, s, |i, j| -z.mat[(i, j)] - w_aff[(i, j)]),
            diag: (0..l)
                .map(|k| -z.diag[k] - dslack_aff.diag[k] * z.diag[k] / slack.diag[k])
                .collect(),
        };
        symmetrize(&mut dz_aff.mat);

        let ap_aff =
            (options.step_fraction * step_to_boundary(&l_slack, &slack, &dslack_aff)?).min(1.0);
        let ad_aff = (options.step_fraction * step_to_boundary(&l_z, &z, &dz_aff)?).min(1.0);
        let mut trial_slack = slack.clone();
        trial_slack.axpy(ap_aff, &dslack_aff);
        let mut trial_z = z.clone();
        trial_z.axpy(ad_aff, &dz_aff);
        let mu_aff = trial_slack.inner(&trial_z) / total_dim;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // Corrector: R = sigma mu I - S Z - dS dZ.
        let sz = &slack.mat * &z.mat;
        let dd = &dslack_aff.mat * &dz_aff.mat;
        let mut r = Mat::from_fn(s, s, |i, j| -sz[(i, j)] - dd[(i, j)]);
        for i in 0..s {
            r[(i, i)] += sigma * mu;
        }
        let r_diag: Vec<f64> = (0..l)
            .map(|k| sigma * mu - slack.diag[k] * z.diag[k] - dslack_aff.diag[k] * dz_aff.diag[k])
            .collect();
        let t3 = &si_mat * &r;
        let t3_diag: Vec<f64> = (0..l).map(|k| r_diag[k] / slack.diag[k]).collect();
        let rhs = Mat::from_fn(m, 1, |k, _| {
            block_inner_general(&problem.constraints[k].0, &t3, &t3_diag)
                - block_inner_general(&problem.constraints[k].0, &t2, &t2_diag)
                - res.d[k]
        });
        let dx = b_factor.solve(&rhs);
        let mut dslack = res.p.clone();
        for k in 0..m {
            let v = dx[(k, 0)];
            if v != 0.0 {
                problem.constraints[k]
                    .0
                    .add_scaled_to(&mut dslack.mat, &mut dslack.diag, v);
            }
        }
        let w_cor = &si_mat * &(&dslack.mat * &z.mat);
        let mut dz = BlockVar {
            mat: Mat::from_fn(s, s, |i, j| t3[(i, j)] - w_cor[(i, j)]),
            diag: (0..l)
                .map(|k| t3_diag[k] - dslack.diag[k] * z.diag[k] / slack.diag[k])
                .collect(),
        };
        symmetrize(&mut dz.mat);

        let ap = (options.step_fraction * step_to_boundary(&l_slack, &slack, &dslack)?).min(1.0);
        let ad = (options.step_fraction * step_to_boundary(&l_z, &z, &dz)?).min(1.0);

        for k in 0..m {
            x[k] += ap * dx[(k, 0)];
        }
        slack.axpy(ap, &dslack);
        z.axpy(ad, &dz);

        if ap.max(ad) < 1e-8 {
            stalls += 1;
            if stalls >= 3 {
                res = residuals(problem, &x, &slack, &z, norm_g, norm_c);
                return Ok(finish(
                    SolverStatus::IllConditioned,
                    x,
                    slack,
                    z,
                    res,
                    iter + 1,
                ));
            }
        } else {
            stalls = 0;
        }
        res = residuals(problem, &x, &slack, &z, norm_g, norm_c);
    }
    let iterations = options.max_iterations;
    Ok(finish(
        SolverStatus::MaxIterations,
        x,
        slack,
        z,
        res,
        iterations,
    ))
}

/// Cholesky of the Schur matrix, retrying with growing diagonal jitter.
fn factor_with_jitter(b: &mut Mat<f64>) -> Option<faer::linalg::solvers::Llt<f64>> {
    let m = b.nrows();
    let mut max_diag = 0.0f64;
    for k in 0..m {
        max_diag = max_diag.max(b[(k, k)].abs());
    }
    let mut jitter = 0.0;
    for attempt in 0..4 {
        if attempt > 0 {
            let add = max_diag.max(1e-300) * 1e-14 * 100.0f64.powi(attempt - 1);
            for k in 0..m {
                b[(k, k)] += add - jitter;
            }
            jitter = add;
        }
        if let Ok(f) = b.llt(Side::Lower) {
            return Some(f);
        }
    }
    None
}

fn finish(
    status: SolverStatus,
    x: Vec<f64>,
    slack: BlockVar,
    z: BlockVar,
    res: Residuals,
    iterations: usize,
) -> SdpSolution {
    SdpSolution {
        status,
        primal_matrix: z.mat,
        primal_lp: z.diag,
        dual_vector: x,
        primal_value: res.dobj,
        dual_value: res.pobj,
        gap: res.gap,
        primal_residual: res.dfeas,
        dual_residual: res.pfeas,
        slack_matrix: slack.mat,
        slack_lp: slack.diag,
        iterations,
        infeasibility_ray: None,
        unbounded_ray: None,
    }
}

/// The engine's minimization diverges to `-inf`, so no feasible `Z` exists.
/// Scale `x` into a Farkas ray and verify it before claiming infeasibility.
fn finish_primal_unbounded(
    problem: &SdpProblem,
    x: Vec<f64>,
    slack: BlockVar,
    z: BlockVar,
    res: Residuals,
    iterations: usize,
) -> SdpSolution {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let ray: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let (s, l) = (problem.sdp_dim, problem.lp_dim);
    let mut dir = BlockVar::zeros(s, l);
    for (k, (f, _)) in problem.constraints.iter().enumerate() {
        f.add_scaled_to(&mut dir.mat, &mut dir.diag, ray[k]);
    }
    let cost: f64 = problem
        .constraints
        .iter()
        .zip(&ray)
        .map(|((_, c), r)| c * r)
        .sum();
    let min_eig = min_eigenvalue(&dir.mat).unwrap_or(f64::NEG_INFINITY);
    let min_diag = dir.diag.iter().copied().fold(f64::INFINITY, f64::min);
    let verified = cost < -1e-8 && min_eig > -1e-6 && min_diag > -1e-6;
    let mut out = finish(
        if verified {
            SolverStatus::Infeasible
        } else {
            SolverStatus::IllConditioned
        },
        x,
        slack,
        z,
        res,
        iterations,
    );
    if verified {
        out.infeasibility_ray = Some(ray);
    }
    out
}

/// The maximization diverges to `+inf`: normalize `Z` into a feasible ray
/// with positive objective gain.
fn finish_dual_unbounded(
    problem: &SdpProblem,
    x: Vec<f64>,
    slack: BlockVar,
    z: BlockVar,
    res: Residuals,
    iterations: usize,
) -> SdpSolution {
    let norm = z.norm().max(1e-300);
    let mut ray = z.clone();
    let sdim = ray.mat.nrows();
    for j in 0..sdim {
        for i in 0..sdim {
            ray.mat[(i, j)] /= norm;
        }
    }
    for v in &mut ray.diag {
        *v /= norm;
    }
    let mut drift = 0.0f64;
    for (f, _) in &problem.constraints {
        drift = drift.max(f.inner(&ray.mat, &ray.diag).abs());
    }
    let gain = problem.objective.inner(&ray.mat, &ray.diag);
    let verified = drift < 1e-6 && gain > 1e-8;
    let mut out = finish(
        if verified {
            SolverStatus::Unbounded
        } else {
            SolverStatus::IllConditioned
        },
        x,
        slack,
        z,
        res,
        iterations,
    );
    if verified {
        out.unbounded_ray = Some((ray.mat, ray.diag));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::sparse::SparseSym;
    use faer::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(dim: usize, i: u32, j: u32) -> SparseSym {
        SparseSym::from_upper(dim, vec![(i.min(j), i.max(j), 1.0)])
    }

    fn solve_default(p: &SdpProblem) -> SdpSolution {
        solve(p, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn rank_one_objective_on_trace_sphere() {
        // max Z_11 with tr Z = 1 on 2x2: value 1.
        let p = SdpProblem {
            sdp_dim: 2,
            lp_dim: 0,
            objective: BlockMatrix::sdp_only(unit(2, 0, 0)),
            constraints: vec![(BlockMatrix::sdp_only(SparseSym::identity(2)), 1.0)],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7);
        assert!((sol.dual_value - 1.0).abs() < 1e-7);
        assert!((sol.primal_matrix[(0, 0)] - 1.0).abs() < 1e-6);
        assert!(sol.primal_matrix[(1, 1)].abs() < 1e-6);
    }

    #[test]
    fn off_diagonal_objective_is_bounded_by_diagonal() {
        // max 2 Z_12 with Z_11 = Z_22 = 1: value 2 at the all-ones matrix.
        let p = SdpProblem {
            sdp_dim: 2,
            lp_dim: 0,
            objective: BlockMatrix::sdp_only(unit(2, 0, 1)),
            constraints: vec![
                (BlockMatrix::sdp_only(unit(2, 0, 0)), 1.0),
                (BlockMatrix::sdp_only(unit(2, 1, 1)), 1.0),
            ],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_value - 2.0).abs() < 1e-7);
        assert!((sol.primal_matrix[(0, 1)] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn pure_diagonal_block_acts_as_linear_program() {
        // max z_0 + 2 z_1 with z_0 + z_1 = 1, z >= 0: value 2.
        let p = SdpProblem {
            sdp_dim: 0,
            lp_dim: 2,
            objective: BlockMatrix::new(SparseSym::zero(0), vec![(0, 1.0), (1, 2.0)]),
            constraints: vec![(
                BlockMatrix::new(SparseSym::zero(0), vec![(0, 1.0), (1, 1.0)]),
                1.0,
            )],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_value - 2.0).abs() < 1e-7);
        assert!(sol.primal_lp[0].abs() < 1e-6);
        assert!((sol.primal_lp[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixed_blocks() {
        // max Z_11 + z_0 with tr Z + z_0 = 1 and Z_11 - z_0 = 0.
        // Optimum puts everything on Z_11 = z_0 = 1/2: value 1.
        let p = SdpProblem {
            sdp_dim: 2,
            lp_dim: 1,
            objective: BlockMatrix::new(unit(2, 0, 0), vec![(0, 1.0)]),
            constraints: vec![
                (
                    BlockMatrix::new(SparseSym::identity(2), vec![(0, 1.0)]),
                    1.0,
                ),
                (BlockMatrix::new(unit(2, 0, 0), vec![(0, -1.0)]), 0.0),
            ],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7);
        assert!((sol.primal_matrix[(0, 0)] - 0.5).abs() < 1e-5);
        assert!((sol.primal_lp[0] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn detects_infeasibility_with_farkas_ray() {
        // tr(E_11 Z) = -1 cannot hold for Z >= 0.
        let p = SdpProblem {
            sdp_dim: 2,
            lp_dim: 0,
            objective: BlockMatrix::sdp_only(SparseSym::zero(2)),
            constraints: vec![(BlockMatrix::sdp_only(unit(2, 0, 0)), -1.0)],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolverStatus::Infeasible);
        let ray = sol.infeasibility_ray.unwrap();
        let cost: f64 = ray[0] * -1.0;
        assert!(cost < 0.0);
        // sum x_k F_k = x_0 E_11 must be PSD, so x_0 >= 0.
        assert!(ray[0] >= 0.0);
    }

    #[test]
    fn detects_unboundedness_with_ray() {
        // max Z_11 with only Z_22 pinned: Z_11 free to grow.
        let p = SdpProblem {
            sdp_dim: 2,
            lp_dim: 0,
            objective: BlockMatrix::sdp_only(unit(2, 0, 0)),
            constraints: vec![(BlockMatrix::sdp_only(unit(2, 1, 1)), 1.0)],
        };
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolverStatus::Unbounded);
        let (ray, _) = sol.unbounded_ray.unwrap();
        assert!(ray[(0, 0)] > 1e-8);
        assert!(ray[(1, 1)].abs() < 1e-6);
    }

    /// Builds a random problem from a planted primal-dual optimal pair with
    /// complementary slackness, so the optimal value is known exactly.
    ///
    /// Strict feasibility is arranged on both sides so the central path
    /// exists: the last constraint matrix lives on the optimal-slack null
    /// space (stepping its multiplier gives a positive definite slack), and
    /// every other matrix is projected orthogonal to a positive completion
    /// of `Z*`, which then is strictly feasible after that completion.
    fn planted_problem(
        rng: &mut ChaCha8Rng,
        s: usize,
        l: usize,
        m: usize,
    ) -> (SdpProblem, f64) {
        let r = (s / 2).max(1);
        // Random orthonormal frame; Z* spans the first r columns, the
        // optimal slack S* the rest.
        let g = Mat::from_fn(s, s, |_, _| rng.random_range(-1.0..1.0f64));
        let q = g.qr().compute_thin_Q();
        let mut zstar = Mat::<f64>::zeros(s, s);
        let mut sstar = Mat::<f64>::zeros(s, s);
        // Unweighted projector onto the slack span, the completion direction.
        let mut cdir = Mat::<f64>::zeros(s, s);
        for k in 0..s {
            let w = rng.random_range(0.2..1.0);
            for i in 0..s {
                for j in 0..s {
                    let e = q[(i, k)] * q[(j, k)];
                    if k < r {
                        zstar[(i, j)] += w * e;
                    } else {
                        sstar[(i, j)] += w * e;
                        cdir[(i, j)] += e;
                    }
                }
            }
        }
        // Diagonal block: complementary supports, completion on the slack's.
        let z_lp: Vec<f64> = (0..l)
            .map(|k| if k % 2 == 0 { rng.random_range(0.2..1.0) } else { 0.0 })
            .collect();
        let s_lp: Vec<f64> = (0..l)
            .map(|k| if k % 2 == 1 { rng.random_range(0.2..1.0) } else { 0.0 })
            .collect();
        let cdir_lp: Vec<f64> = (0..l)
            .map(|k| if k % 2 == 1 { 1.0 } else { 0.0 })
            .collect();
        let cdir_sq = {
            let mut acc: f64 = cdir_lp.iter().map(|v| v * v).sum();
            for i in 0..s {
                for j in 0..s {
                    acc += cdir[(i, j)] * cdir[(i, j)];
                }
            }
            acc
        };
        let mut cons_mats: Vec<BlockMatrix> = Vec::with_capacity(m);
        for _ in 0..m - 1 {
            let mut dense = Mat::from_fn(s, s, |i, j| {
                if i <= j {
                    rng.random_range(-1.0..1.0)
                } else {
                    0.0
                }
            });
            for i in 0..s {
                for j in 0..i {
                    dense[(i, j)] = dense[(j, i)];
                }
            }
            let mut lp: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut dot = 0.0;
            for i in 0..s {
                for j in 0..s {
                    dot += dense[(i, j)] * cdir[(i, j)];
                }
            }
            for (a, b) in lp.iter().zip(&cdir_lp) {
                dot += a * b;
            }
            let t = dot / cdir_sq;
            for i in 0..s {
                for j in 0..s {
                    dense[(i, j)] -= t * cdir[(i, j)];
                }
            }
            for (a, b) in lp.iter_mut().zip(&cdir_lp) {
                *a -= t * b;
            }
            cons_mats.push(dense_to_block(&dense, &lp));
        }
        // Last constraint: positive on the Z* span and on the diagonal
        // indices where z_lp > 0, zero on the completion support.
        let mut dense = Mat::<f64>::zeros(s, s);
        for k in 0..r {
            let w = rng.random_range(0.5..1.0);
            for i in 0..s {
                for j in 0..s {
                    dense[(i, j)] += w * q[(i, k)] * q[(j, k)];
                }
            }
        }
        let lp: Vec<f64> = (0..l)
            .map(|k| if k % 2 == 0 { rng.random_range(0.5..1.0) } else { 0.0 })
            .collect();
        cons_mats.push(dense_to_block(&dense, &lp));

        let xstar: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        // G = sum x* F - S*, presented sparsely.
        let mut g_dense = Mat::<f64>::zeros(s, s);
        let mut g_lp = vec![0.0; l];
        for (k, f) in cons_mats.iter().enumerate() {
            f.add_scaled_to(&mut g_dense, &mut g_lp, xstar[k]);
        }
        for i in 0..s {
            for j in 0..s {
                g_dense[(i, j)] -= sstar[(i, j)];
            }
        }
        for k in 0..l {
            g_lp[k] -= s_lp[k];
        }
        let objective = dense_to_block(&g_dense, &g_lp);
        let constraints: Vec<(BlockMatrix, f64)> = cons_mats
            .into_iter()
            .map(|f| {
                let c = f.inner(&zstar, &z_lp);
                (f, c)
            })
            .collect();
        let value: f64 = constraints
            .iter()
            .zip(&xstar)
            .map(|((_, c), xk)| c * xk)
            .sum();
        (
            SdpProblem {
                sdp_dim: s,
                lp_dim: l,
                objective,
                constraints,
            },
            value,
        )
    }

    fn dense_to_block(dense: &Mat<f64>, lp: &[f64]) -> BlockMatrix {
        let s = dense.nrows();
        let mut entries = Vec::new();
        for i in 0..s as u32 {
            for j in i..s as u32 {
                entries.push((i, j, dense[(i as usize, j as usize)]));
            }
        }
        BlockMatrix::new(
            SparseSym::from_upper(s, entries),
            lp.iter().enumerate().map(|(k, &v)| (k as u32, v)).collect(),
        )
    }

    #[test]
    fn recovers_planted_optima() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let s = 2 + 2 * (trial % 6);
            let l = trial % 4;
            let m = 1 + (trial % 7);
            let (p, value) = planted_problem(&mut rng, s, l, m);
            let sol = solve(&p, &SolverOptions::default()).unwrap();
            assert!(
                sol.reached(1e-7),
                "trial {trial}: status {:?} gap {:.2e}",
                sol.status,
                sol.gap
            );
            let scale = 1.0 + value.abs();
            assert!(
                (sol.primal_value - value).abs() / scale < 1e-6,
                "trial {trial}: value {} expected {}",
                sol.primal_value,
                value
            );
            assert!((sol.dual_value - value).abs() / scale < 1e-6);
        }
    }
}
