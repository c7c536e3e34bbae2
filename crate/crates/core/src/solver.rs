//! Basis pursuit denoise, `min ||a||_1 s.t. ||x - A Psi a||_2 <= eps`.
//!
//! Solved by ADMM on the split `a = c`, where `a` is kept inside the
//! constraint set by an exact projection (thin SVD plus a scalar Newton
//! solve) and `c` carries the l1 term. Optimality is certified by a dual
//! feasible point of `max <y, x> - eps ||y|| s.t. ||(A Psi)^T y||_inf <= 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bases::SparsityBasis;
use crate::error::{check_len, Error, Result};
use crate::network::MeasurementEnsemble;

const OVER_RELAXATION: f64 = 1.6;

/// Enumeration limit for [`brute_force_l0`].
pub const L0_SUPPORT_LIMIT: u128 = 1_000_000;

/// Residual tolerance for equality-constrained problems (`eps = 0`), relative
/// to `max(1, ||x||)`. Also the floor for tiny positive budgets.
pub const EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub constraint_tol: f64,
    pub duality_gap_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            constraint_tol: 1e-6,
            duality_gap_tol: 1e-7,
            max_iterations: 20_000,
        }
    }
}

/// `A Psi`, formed row by row as `Psi^T` applied to each row of `A`.
pub fn sensing_matrix(operator: &DMatrix<f64>, basis: &SparsityBasis) -> Result<DMatrix<f64>> {
    check_len(basis.len(), operator.ncols())?;
    let mut b = DMatrix::zeros(operator.nrows(), operator.ncols());
    let mut row = vec![0.0; operator.ncols()];
    for i in 0..operator.nrows() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = operator[(i, j)];
        }
        let coeffs = basis.analyze(&row)?;
        for (j, v) in coeffs.into_iter().enumerate() {
            b[(i, j)] = v;
        }
    }
    Ok(b)
}

#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    sensing: DMatrix<f64>,
    basis: SparsityBasis,
    observation: DVector<f64>,
    noise_budget: f64,
    settings: SolverSettings,
}

impl RecoveryProblem {
    /// `operator` is the `M x N` measurement matrix acting on samples.
    pub fn new(
        operator: &DMatrix<f64>,
        basis: SparsityBasis,
        observation: &[f64],
        noise_budget: f64,
    ) -> Result<Self> {
        check_len(operator.nrows(), observation.len())?;
        if !(noise_budget >= 0.0) || !noise_budget.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise budget must be finite and nonnegative, got {noise_budget}"
            )));
        }
        Ok(Self {
            sensing: sensing_matrix(operator, &basis)?,
            basis,
            observation: DVector::from_column_slice(observation),
            noise_budget,
            settings: SolverSettings::default(),
        })
    }

    pub fn from_ensemble(
        ensemble: &MeasurementEnsemble,
        basis: SparsityBasis,
        observation: &[f64],
        noise_budget: f64,
    ) -> Result<Self> {
        Self::new(&ensemble.matrix, basis, observation, noise_budget)
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn sensing(&self) -> &DMatrix<f64> {
        &self.sensing
    }

    pub fn basis(&self) -> &SparsityBasis {
        &self.basis
    }

    pub fn observation(&self) -> &DVector<f64> {
        &self.observation
    }

    pub fn noise_budget(&self) -> f64 {
        self.noise_budget
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub coefficients: Vec<f64>,
    pub signal: Vec<f64>,
    pub residual_norm: f64,
    pub noise_budget: f64,
    pub l1_norm: f64,
    pub dual_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rmse_vs_truth: Option<f64>,
}

impl RecoveryReport {
    /// Indices with `|a_i| > rel_tol * max |a|`.
    pub fn support(&self, rel_tol: f64) -> Vec<usize> {
        let peak = self.coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return Vec::new();
        }
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > rel_tol * peak)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn duality_gap(&self) -> f64 {
        self.l1_norm - self.dual_bound
    }

    /// Records the relative error of the recovered signal against `truth`.
    pub fn with_truth(mut self, truth: &[f64]) -> Result<Self> {
        self.rmse_vs_truth = Some(rmse(truth, &self.signal)?);
        Ok(self)
    }
}

/// Euclidean projection onto `{a : ||B a - x|| <= eps}`.
struct Projector {
    /// Right singular vectors, `N x r`.
    v: DMatrix<f64>,
    /// Left singular vectors, `M x r`.
    p: DMatrix<f64>,
    s: Vec<f64>,
    /// `P^T x`.
    b: Vec<f64>,
    /// Budget left for the in-range residual; `None` means equality.
    eps_eff: Option<f64>,
}

impl Projector {
    fn new(sensing: &DMatrix<f64>, x: &DVector<f64>, eps: f64, ctol: f64) -> Result<Self> {
        let svd = sensing.clone().svd(true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => {
                return Err(Error::Numerical(
                    "singular value decomposition failed".into(),
                ))
            }
        };
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-10 * smax && smax > 0.0)
            .collect();
        let p = u.select_columns(&keep);
        let v = vt.select_rows(&keep).transpose();
        let s: Vec<f64> = keep.iter().map(|&i| svd.singular_values[i]).collect();
        let bvec = p.transpose() * x;
        let b: Vec<f64> = bvec.iter().copied().collect();
        let outside2 = (x - &p * &bvec).norm_squared();
        let eq_tol = EQUALITY_TOL * x.norm().max(1.0);
        let slack = (eps * (1.0 + ctol)).max(eq_tol);
        if outside2.sqrt() > slack {
            return Err(Error::Infeasible(format!(
                "observation lies {:.3e} outside the range of the operator, budget is {eps:.3e}",
                outside2.sqrt()
            )));
        }
        let eff2 = eps * eps - outside2;
        let eps_eff = if eps == 0.0 || eff2 <= (1e-12 * eps).powi(2) {
            None
        } else {
            Some(eff2.sqrt())
        };
        Ok(Self {
            v,
            p,
            s,
            b,
            eps_eff,
        })
    }

    fn project(&self, w: &DVector<f64>) -> DVector<f64> {
        let c = self.v.transpose() * w;
        let g: Vec<f64> = (0..self.s.len())
            .map(|i| self.s[i] * c[i] - self.b[i])
            .collect();
        let lambda = match self.eps_eff {
            None => f64::INFINITY,
            Some(eps) => {
                let norm = |lam: f64| -> f64 {
                    g.iter()
                        .zip(&self.s)
                        .map(|(gi, si)| (gi / (1.0 + lam * si * si)).powi(2))
                        .sum::<f64>()
                        .sqrt()
                };
                if norm(0.0) <= eps {
                    return w.clone();
                }
                // 1/||r(lambda)|| - 1/eps is concave and increasing, so Newton
                // from lambda = 0 approaches the root monotonically.
                let mut lam = 0.0;
                for _ in 0..200 {
                    let mut n2 = 0.0;
                    let mut dn2 = 0.0;
                    for (gi, si) in g.iter().zip(&self.s) {
                        let den = 1.0 + lam * si * si;
                        let r = gi / den;
                        n2 += r * r;
                        dn2 += -2.0 * r * r * si * si / den;
                    }
                    let n = n2.sqrt();
                    if (n - eps).abs() <= 1e-14 * eps {
                        break;
                    }
                    let phi = 1.0 / n - 1.0 / eps;
                    let dphi = -0.5 * dn2 / (n2 * n);
                    let step = phi / dphi;
                    lam -= step;
                    if !step.is_finite() || step.abs() <= 1e-16 * lam.abs() {
                        break;
                    }
                }
                lam
            }
        };
        let delta = DVector::from_iterator(
            self.s.len(),
            (0..self.s.len()).map(|i| {
                let si = self.s[i];
                let target = if lambda.is_infinite() {
                    self.b[i] / si
                } else {
                    (c[i] + lambda * si * self.b[i]) / (1.0 + lambda * si * si)
                };
                target - c[i]
            }),
        );
        w + &self.v * delta
    }

    /// Least-squares `y` with `B^T y ~ g`.
    fn pullback(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.v.transpose() * g;
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c /= self.s[i];
        }
        &self.p * coeffs
    }
}

fn soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    v.map(|x| {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    })
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

struct Certifier<'a> {
    sensing: &'a DMatrix<f64>,
    x: &'a DVector<f64>,
    eps: f64,
}

impl Certifier<'_> {
    /// Dual objective after scaling `y` into the feasible set.
    fn value(&self, y: &DVector<f64>) -> f64 {
        let bty = self.sensing.tr_mul(y);
        let scale = bty.amax().max(1.0);
        let raw = y.dot(self.x) - self.eps * y.norm();
        if raw.is_finite() {
            raw / scale
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Solves the basis pursuit denoise program.
pub fn solve_bpdn(problem: &RecoveryProblem) -> Result<RecoveryReport> {
    let b = &problem.sensing;
    let x = &problem.observation;
    let eps = problem.noise_budget;
    let settings = problem.settings;
    let n = b.ncols();

    let finish = |a: DVector<f64>, dual: f64, iterations: usize, converged: bool| {
        let residual_norm = (b * &a - x).norm();
        let coefficients: Vec<f64> = a.iter().copied().collect();
        let signal = problem.basis.apply(&coefficients)?;
        Ok(RecoveryReport {
            l1_norm: l1(&a),
            coefficients,
            signal,
            residual_norm,
            noise_budget: eps,
            dual_bound: dual,
            iterations,
            converged,
            rmse_vs_truth: None,
        })
    };

    if x.norm() <= eps || x.iter().all(|v| *v == 0.0) {
        return finish(DVector::zeros(n), 0.0, 0, true);
    }

    let projector = Projector::new(b, x, eps, settings.constraint_tol)?;
    let certifier = Certifier { sensing: b, x, eps };
    let feasible_tol =
        (eps * (1.0 + settings.constraint_tol)).max(EQUALITY_TOL * x.norm().max(1.0));

    let least_norm = projector.project(&DVector::zeros(n));
    let mut rho = 10.0 / least_norm.amax().max(f64::MIN_POSITIVE);
    let mut c = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let mut best = least_norm.clone();
    let mut best_l1 = l1(&best);
    let mut best_dual = f64::NEG_INFINITY;
    let check_every = 10;
    let mut last_support = Vec::new();

    for it in 1..=settings.max_iterations {
        let a = projector.project(&(&c - &u));
        let relaxed = &a * OVER_RELAXATION + &c * (1.0 - OVER_RELAXATION);
        let c_old = std::mem::replace(&mut c, soft_threshold(&(&relaxed + &u), 1.0 / rho));
        u += &relaxed - &c;

        if it % check_every == 0 || it == settings.max_iterations {
            let a_l1 = l1(&a);
            if a_l1 < best_l1 {
                best = a.clone();
                best_l1 = a_l1;
            }
            let support: Vec<usize> = (0..n).filter(|&i| c[i] != 0.0).collect();
            let fresh = support != last_support;
            last_support = support;
            if let Some(polished) = fresh.then(|| polish(b, x, &c, eps, feasible_tol)).flatten() {
                for y in &polished.dual_candidates {
                    if y.norm() > 0.0 {
                        best_dual = best_dual.max(certifier.value(y));
                    }
                }
                if polished.l1 < best_l1 {
                    best = polished.point;
                    best_l1 = polished.l1;
                }
            }
            let y = projector.pullback(&(&u * rho));
            best_dual = best_dual.max(certifier.value(&y));
            let r = x - b * &a;
            if r.norm() > 0.0 {
                best_dual = best_dual.max(certifier.value(&r));
            }
            if best_l1 - best_dual <= settings.duality_gap_tol * best_l1.max(1.0) {
                return finish(best, best_dual, it, true);
            }

            let primal_res = (&a - &c).norm();
            let dual_res = rho * (&c - &c_old).norm();
            if primal_res > 10.0 * dual_res {
                rho *= 2.0;
                u /= 2.0;
            } else if dual_res > 10.0 * primal_res {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    finish(best, best_dual, settings.max_iterations, false)
}

/// Minimizes `sign(c)^T a` over the constraint set restricted to the support
/// of the sparse iterate `c`. When support and signs are right this is the
/// exact minimizer: the least-squares fit moved to the constraint boundary
/// along `-(B_S^T B_S)^-1 sign(c)`.
fn polish(
    b: &DMatrix<f64>,
    x: &DVector<f64>,
    c: &DVector<f64>,
    eps: f64,
    feasible_tol: f64,
) -> Option<Polished> {
    let support: Vec<usize> = (0..c.len()).filter(|&i| c[i] != 0.0).collect();
    if support.is_empty() || support.len() > b.nrows() {
        return None;
    }
    let sub = b.select_columns(&support);
    let sign = DVector::from_iterator(support.len(), support.iter().map(|&i| c[i].signum()));
    let svd = sub.clone().svd(true, true);
    let (p, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return None;
    }
    let mut coeffs = p.tr_mul(x);
    for (i, v) in coeffs.iter_mut().enumerate() {
        *v /= sv[i];
    }
    let mut a_s = vt.tr_mul(&coeffs);
    let r_ls = (&sub * &a_s - x).norm();
    let tau2 = eps * eps - r_ls * r_ls;
    if tau2 > 0.0 {
        let mut w = vt * &sign;
        for (i, v) in w.iter_mut().enumerate() {
            *v /= sv[i] * sv[i];
        }
        let w = vt.tr_mul(&w);
        let denom = sign.dot(&w).sqrt();
        if denom > 0.0 {
            a_s -= w * (tau2.sqrt() / denom);
        }
    }
    let residual = x - &sub * &a_s;
    if residual.norm() > feasible_tol {
        return None;
    }
    // Minimum-norm y with B_S^T y = sign(c).
    let mut dual = vt * &sign;
    for (i, v) in dual.iter_mut().enumerate() {
        *v /= sv[i];
    }
    let dual = p * dual;
    let mut a = DVector::zeros(c.len());
    for (k, &i) in support.iter().enumerate() {
        a[i] = a_s[k];
    }
    Some(Polished {
        l1: l1(&a),
        point: a,
        dual_candidates: [residual, dual],
    })
}

struct Polished {
    point: DVector<f64>,
    l1: f64,
    dual_candidates: [DVector<f64>; 2],
}

fn least_squares(
    b: &DMatrix<f64>,
    x: &DVector<f64>,
    support: &[usize],
) -> Option<(DVector<f64>, f64)> {
    if support.is_empty() {
        return Some((DVector::zeros(0), x.norm()));
    }
    let sub = b.select_columns(support);
    let svd = sub.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let coeffs = svd.solve(x, 1e-12 * smax.max(f64::MIN_POSITIVE)).ok()?;
    let residual = (&sub * &coeffs - x).norm();
    Some((coeffs, residual))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Solution {
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exhaustive search over supports of size at most `k_max`.
///
/// Smaller supports win ties: a larger support replaces the incumbent only if
/// it lowers the residual by more than `1e-12 max(1, ||x||)`.
pub fn brute_force_l0(
    operator: &DMatrix<f64>,
    basis: &SparsityBasis,
    observation: &[f64],
    k_max: usize,
) -> Result<L0Solution> {
    check_len(operator.nrows(), observation.len())?;
    let b = sensing_matrix(operator, basis)?;
    let n = b.ncols();
    let k_max = k_max.min(n);
    let count: u128 = (0..=k_max).map(|k| binomial(n, k)).sum();
    if count > L0_SUPPORT_LIMIT {
        return Err(Error::TooManySupports {
            count,
            limit: L0_SUPPORT_LIMIT,
        });
    }
    let x = DVector::from_column_slice(observation);
    let tie = 1e-12 * x.norm().max(1.0);
    let mut best_support = Vec::new();
    let mut best_coeffs = DVector::zeros(0);
    let mut best_res = x.norm();
    for k in 1..=k_max {
        for_each_subset(n, k, |support| {
            if let Some((coeffs, res)) = least_squares(&b, &x, support) {
                if res < best_res - tie {
                    best_res = res;
                    best_support = support.to_vec();
                    best_coeffs = coeffs;
                }
            }
        });
    }
    let mut coefficients = vec![0.0; n];
    for (k, &i) in best_support.iter().enumerate() {
        coefficients[i] = best_coeffs[k];
    }
    Ok(L0Solution {
        support: best_support,
        coefficients,
        residual_norm: best_res,
    })
}

/// Relative error `||truth - estimate|| / ||truth||`.
pub fn rmse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    let t2: f64 = truth.iter().map(|v| v * v).sum();
    let d2: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (t - e) * (t - e))
        .sum();
    if t2 == 0.0 {
        return if d2 == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::ZeroTruth)
        };
    }
    Ok((d2 / t2).sqrt())
}
