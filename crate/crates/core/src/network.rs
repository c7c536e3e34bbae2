//! Linear recurrent networks viewed as structured sensing operators.
//!
//! A network is stored together with its eigen-structure `W = U diag(d) U^-1`
//! so the measurement matrix `A = [z | Wz | W^2 z | ...]` can be formed either
//! by repeated multiplication or through the factorization `A = U Z F`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

/// Random-phase orthogonal networks up to this size are synthesized from
/// explicit conjugate-pair eigenvalues; larger ones orthogonalize a Gaussian
/// matrix and recover the eigen-structure from its real Schur form.
pub const EIGEN_SYNTHESIS_MAX_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Topology {
    RandomOrthogonal,
    BlockDiagonal {
        block_sizes: Vec<usize>,
    },
    SmallWorld {
        block_sizes: Vec<usize>,
        hub_count: usize,
    },
    /// Symmetric orthogonal connectivity: real eigenvalues `+-q`.
    Symmetric,
    /// Only `effective_nodes` eigenvalues are nonzero.
    RankDeficient {
        effective_nodes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedforward {
    /// `z = U 1 / sqrt(M)`, spreading the input evenly over all eigen-directions.
    #[default]
    UniformEigen,
    /// i.i.d. `N(0, 1/M)` entries.
    GaussianIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenPhases {
    /// Phases drawn uniformly from `[0, 2pi)`.
    #[default]
    Random,
    /// The `M`-th roots of `-1`; makes `F / sqrt(M)` unitary when `L = M`.
    Equispaced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: usize,
    #[serde(default = "default_topology")]
    pub topology: Topology,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default)]
    pub feedforward: Feedforward,
    #[serde(default)]
    pub phases: EigenPhases,
    #[serde(default)]
    pub seed: u64,
}

fn default_topology() -> Topology {
    Topology::RandomOrthogonal
}

fn default_decay() -> f64 {
    1.0
}

impl NetworkSpec {
    pub fn new(nodes: usize, topology: Topology, decay: f64, seed: u64) -> Self {
        Self {
            nodes,
            topology,
            decay,
            feedforward: Feedforward::UniformEigen,
            phases: EigenPhases::Random,
            seed,
        }
    }

    pub fn random_orthogonal(nodes: usize, decay: f64, seed: u64) -> Self {
        Self::new(nodes, Topology::RandomOrthogonal, decay, seed)
    }

    pub fn with_feedforward(mut self, feedforward: Feedforward) -> Self {
        self.feedforward = feedforward;
        self
    }

    pub fn with_phases(mut self, phases: EigenPhases) -> Self {
        self.phases = phases;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.nodes;
        if m == 0 || !m.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "node count must be a positive even integer, got {m}"
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        match &self.topology {
            Topology::BlockDiagonal { block_sizes } => check_blocks(block_sizes, m)?,
            Topology::SmallWorld {
                block_sizes,
                hub_count,
            } => {
                check_blocks(block_sizes, m)?;
                if *hub_count > m {
                    return Err(Error::InvalidArgument(format!(
                        "hub count {hub_count} exceeds node count {m}"
                    )));
                }
            }
            Topology::RankDeficient { effective_nodes } => {
                if *effective_nodes == 0 || *effective_nodes > m {
                    return Err(Error::InvalidArgument(format!(
                        "effective node count must lie in 1..={m}, got {effective_nodes}"
                    )));
                }
            }
            Topology::RandomOrthogonal | Topology::Symmetric => {}
        }
        Ok(())
    }
}

fn check_blocks(block_sizes: &[usize], m: usize) -> Result<()> {
    if block_sizes.iter().any(|&b| b < 2) {
        return Err(Error::InvalidArgument(format!(
            "block sizes must each be at least 2, got {block_sizes:?}"
        )));
    }
    let total: usize = block_sizes.iter().sum();
    if total != m {
        return Err(Error::InvalidArgument(format!(
            "block sizes sum to {total}, expected {m}"
        )));
    }
    Ok(())
}

/// A linear network `x[n] = W x[n-1] + z s[n] + noise[n]` with its eigen-structure.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    weights: DMatrix<f64>,
    feedforward: DVector<f64>,
    eigenvalues: DVector<Complex64>,
    eigenvectors: DMatrix<Complex64>,
    projected_feedforward: DVector<Complex64>,
}

/// One diagonal block of a real normal matrix in its rotation-block form.
#[derive(Debug, Clone, Copy)]
enum EigenBlock {
    /// Rotation by the given angle: eigenvalues `e^{+-jw}`.
    Pair(f64),
    /// A real eigenvalue.
    Real(f64),
}

impl EigenBlock {
    fn size(self) -> usize {
        match self {
            EigenBlock::Pair(_) => 2,
            EigenBlock::Real(_) => 1,
        }
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormalizes the columns of `x` (Householder QR) keeping the sign
/// convention `diag(R) > 0`, so column `j` stays aligned with the span of the
/// first `j + 1` input columns.
fn orthonormalize_columns(x: DMatrix<f64>) -> DMatrix<f64> {
    let qr = x.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed random orthogonal matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    orthonormalize_columns(gaussian_matrix(rng, n, n))
}

fn block_phases<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
    active: usize,
    phases: EigenPhases,
) -> Vec<EigenBlock> {
    let mut blocks = Vec::with_capacity(size);
    let pairs = active / 2;
    for m in 0..pairs {
        let w = match phases {
            EigenPhases::Random => rng.random_range(0.0..2.0 * PI),
            EigenPhases::Equispaced => PI * (2 * m + 1) as f64 / active as f64,
        };
        blocks.push(EigenBlock::Pair(w));
    }
    if active % 2 == 1 {
        let v = match phases {
            EigenPhases::Random => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            EigenPhases::Equispaced => -1.0,
        };
        blocks.push(EigenBlock::Real(v));
    }
    for _ in active..size {
        blocks.push(EigenBlock::Real(0.0));
    }
    blocks
}

/// Real block-diagonal matrix and its complex eigen-structure.
fn blocks_to_factors(blocks: &[EigenBlock]) -> (DMatrix<f64>, DMatrix<Complex64>, Vec<Complex64>) {
    let n: usize = blocks.iter().map(|b| b.size()).sum();
    let mut real = DMatrix::zeros(n, n);
    let mut vecs = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut vals = Vec::with_capacity(n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut i = 0;
    for &b in blocks {
        match b {
            EigenBlock::Pair(w) => {
                let (s, c) = w.sin_cos();
                real[(i, i)] = c;
                real[(i, i + 1)] = -s;
                real[(i + 1, i)] = s;
                real[(i + 1, i + 1)] = c;
                // R (1, -j) = e^{jw} (1, -j)
                vecs[(i, i)] = Complex64::new(h, 0.0);
                vecs[(i + 1, i)] = Complex64::new(0.0, -h);
                vecs[(i, i + 1)] = Complex64::new(h, 0.0);
                vecs[(i + 1, i + 1)] = Complex64::new(0.0, h);
                vals.push(Complex64::from_polar(1.0, w));
                vals.push(Complex64::from_polar(1.0, -w));
            }
            EigenBlock::Real(v) => {
                real[(i, i)] = v;
                vecs[(i, i)] = Complex64::new(1.0, 0.0);
                vals.push(Complex64::new(v, 0.0));
            }
        }
        i += b.size();
    }
    (real, vecs, vals)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

struct Factors {
    /// Unit-decay connectivity.
    orthogonal: DMatrix<f64>,
    eigenvectors: DMatrix<Complex64>,
    eigenvalues: Vec<Complex64>,
}

/// `Q B Q^T` with `B` block-diagonal.
fn synthesize(q: &DMatrix<f64>, blocks: &[EigenBlock]) -> Factors {
    let (b, v, vals) = blocks_to_factors(blocks);
    let orthogonal = q * b * q.transpose();
    let eigenvectors = to_complex(q) * v;
    Factors {
        orthogonal,
        eigenvectors,
        eigenvalues: vals,
    }
}

/// Eigen-structure of a real orthogonal (more generally, normal) matrix from
/// its real Schur form.
fn factor_normal(o: &DMatrix<f64>) -> Result<Factors> {
    let n = o.nrows();
    let schur = nalgebra::linalg::Schur::try_new(o.clone(), 1e-14, 10_000 * n.max(1))
        .ok_or_else(|| Error::Numerical("real Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let qc = to_complex(&q);
    let mut local = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut vals = Vec::with_capacity(n);
    let scale = t.amax().max(1.0);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-12 * scale {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc < 0.0 {
                let lam = Complex64::new(mean, (-disc).sqrt());
                let mut v0 = Complex64::new(b, 0.0);
                let mut v1 = lam - a;
                let nrm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
                v0 /= nrm;
                v1 /= nrm;
                local[(i, i)] = v0;
                local[(i + 1, i)] = v1;
                local[(i, i + 1)] = v0.conj();
                local[(i + 1, i + 1)] = v1.conj();
                vals.push(lam);
                vals.push(lam.conj());
            } else {
                let block = DMatrix::from_row_slice(2, 2, &[a, 0.5 * (b + c), 0.5 * (b + c), d]);
                let eig = block.symmetric_eigen();
                for k in 0..2 {
                    local[(i, i + k)] = Complex64::new(eig.eigenvectors[(0, k)], 0.0);
                    local[(i + 1, i + k)] = Complex64::new(eig.eigenvectors[(1, k)], 0.0);
                    vals.push(Complex64::new(eig.eigenvalues[k], 0.0));
                }
            }
            i += 2;
        } else {
            local[(i, i)] = Complex64::new(1.0, 0.0);
            vals.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    Ok(Factors {
        orthogonal: o.clone(),
        eigenvectors: qc * local,
        eigenvalues: vals,
    })
}

fn block_diagonal_factors<R: Rng + ?Sized>(
    rng: &mut R,
    block_sizes: &[usize],
    phases: EigenPhases,
) -> Factors {
    let m: usize = block_sizes.iter().sum();
    let mut orthogonal = DMatrix::zeros(m, m);
    let mut eigenvectors = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    let mut eigenvalues = Vec::with_capacity(m);
    let mut offset = 0;
    for &size in block_sizes {
        let q = haar_orthogonal(rng, size);
        let blocks = block_phases(rng, size, size, phases);
        let f = synthesize(&q, &blocks);
        orthogonal
            .view_mut((offset, offset), (size, size))
            .copy_from(&f.orthogonal);
        eigenvectors
            .view_mut((offset, offset), (size, size))
            .copy_from(&f.eigenvectors);
        eigenvalues.extend(f.eigenvalues);
        offset += size;
    }
    Factors {
        orthogonal,
        eigenvectors,
        eigenvalues,
    }
}

/// Replaces `hub_count` columns of a block-diagonal orthogonal matrix with dense
/// Gaussian columns and re-orthonormalizes the whole column set, hubs first.
fn small_world_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    block_sizes: &[usize],
    hub_count: usize,
    phases: EigenPhases,
) -> DMatrix<f64> {
    let base = block_diagonal_factors(rng, block_sizes, phases).orthogonal;
    let m = base.nrows();
    let mut hubs = index::sample(rng, m, hub_count).into_vec();
    hubs.sort_unstable();
    let mut order: Vec<usize> = hubs.clone();
    order.extend((0..m).filter(|j| !hubs.contains(j)));
    let mut x = DMatrix::zeros(m, m);
    for (pos, &col) in order.iter().enumerate() {
        if hubs.contains(&col) {
            let dense: DVector<f64> = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
            x.set_column(pos, &dense);
        } else {
            x.set_column(pos, &base.column(col));
        }
    }
    let q = orthonormalize_columns(x);
    let mut out = DMatrix::zeros(m, m);
    for (pos, &col) in order.iter().enumerate() {
        out.set_column(col, &q.column(pos));
    }
    out
}

impl Network {
    /// Builds the connectivity, its eigen-factors and the feed-forward vector.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.nodes;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let factors = match &spec.topology {
            Topology::RandomOrthogonal => {
                if spec.phases == EigenPhases::Equispaced || m <= EIGEN_SYNTHESIS_MAX_NODES {
                    let q = haar_orthogonal(&mut rng, m);
                    let blocks = block_phases(&mut rng, m, m, spec.phases);
                    synthesize(&q, &blocks)
                } else {
                    factor_normal(&haar_orthogonal(&mut rng, m))?
                }
            }
            Topology::BlockDiagonal { block_sizes } => {
                block_diagonal_factors(&mut rng, block_sizes, spec.phases)
            }
            Topology::SmallWorld {
                block_sizes,
                hub_count,
            } => factor_normal(&small_world_matrix(
                &mut rng,
                block_sizes,
                *hub_count,
                spec.phases,
            ))?,
            Topology::Symmetric => {
                let q = haar_orthogonal(&mut rng, m);
                let blocks: Vec<EigenBlock> = (0..m)
                    .map(|_| EigenBlock::Real(if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
                    .collect();
                synthesize(&q, &blocks)
            }
            Topology::RankDeficient { effective_nodes } => {
                let q = haar_orthogonal(&mut rng, m);
                let blocks = block_phases(&mut rng, m, *effective_nodes, spec.phases);
                synthesize(&q, &blocks)
            }
        };

        let q = spec.decay;
        let weights = factors.orthogonal * q;
        let eigenvalues = DVector::from_iterator(m, factors.eigenvalues.iter().map(|v| v * q));
        let eigenvectors = factors.eigenvectors;
        let active: Vec<bool> = eigenvalues.iter().map(|v| v.norm() > 1e-12).collect();
        let active_count = active.iter().filter(|a| **a).count();

        let feedforward = match spec.feedforward {
            Feedforward::UniformEigen => {
                let w = 1.0 / (active_count as f64).sqrt();
                let coeffs = DVector::from_iterator(
                    m,
                    active
                        .iter()
                        .map(|&a| Complex64::new(if a { w } else { 0.0 }, 0.0)),
                );
                (&eigenvectors * coeffs).map(|c| c.re)
            }
            Feedforward::GaussianIid => {
                let sd = 1.0 / (m as f64).sqrt();
                DVector::from_fn(m, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
            }
        };
        let projected_feedforward = eigenvectors
            .clone()
            .lu()
            .solve(&feedforward.map(|v| Complex64::new(v, 0.0)))
            .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;

        Ok(Self {
            spec: spec.clone(),
            weights,
            feedforward,
            eigenvalues,
            eigenvectors,
            projected_feedforward,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn nodes(&self) -> usize {
        self.spec.nodes
    }

    pub fn decay(&self) -> f64 {
        self.spec.decay
    }

    /// Connectivity `W`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Feed-forward vector `z`.
    pub fn feedforward(&self) -> &DVector<f64> {
        &self.feedforward
    }

    pub fn eigenvalues(&self) -> &DVector<Complex64> {
        &self.eigenvalues
    }

    /// Eigenvector matrix `U`.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    /// Diagonal of `Z = diag(U^-1 z)`.
    pub fn projected_feedforward(&self) -> &DVector<Complex64> {
        &self.projected_feedforward
    }

    /// Phases of the eigenvalues in the closed upper half plane (one per
    /// conjugate pair, plus real eigenvalues).
    pub fn eigen_phases(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .filter(|v| v.im >= 0.0)
            .map(|v| v.arg())
            .collect()
    }

    /// Spectral norm of `U`.
    pub fn eigenvector_norm(&self) -> f64 {
        let sv = self.eigenvectors.clone().singular_values();
        sv.iter().copied().fold(0.0, f64::max)
    }

    /// Largest imaginary part of `U diag(d) U^-1` and its largest deviation
    /// from `W`.
    pub fn realness_residue(&self) -> Result<(f64, f64)> {
        let inv = self
            .eigenvectors
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;
        let recon = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues) * inv;
        let imag = recon.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        let real = recon
            .iter()
            .zip(self.weights.iter())
            .map(|(c, w)| (c.re - w).abs())
            .fold(0.0, f64::max);
        Ok((imag, real))
    }

    /// Runs the linear recursion from `x[0] = 0` and returns `x[1..=T]`.
    pub fn run_recursion(
        &self,
        inputs: &[f64],
        noise: Option<&[DVector<f64>]>,
    ) -> Result<Vec<DVector<f64>>> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("input sequence is empty".into()));
        }
        if let Some(noise) = noise {
            crate::error::check_len(inputs.len(), noise.len())?;
            if let Some(bad) = noise.iter().find(|v| v.len() != self.nodes()) {
                return Err(Error::LengthMismatch {
                    expected: self.nodes(),
                    found: bad.len(),
                });
            }
        }
        let mut states = Vec::with_capacity(inputs.len());
        let mut x = DVector::zeros(self.nodes());
        for (t, &s) in inputs.iter().enumerate() {
            let mut next = &self.weights * &x;
            next.axpy(s, &self.feedforward, 1.0);
            if let Some(noise) = noise {
                next += &noise[t];
            }
            x = next;
            states.push(x.clone());
        }
        Ok(states)
    }

    /// Final state `x[T]` without keeping the trajectory.
    pub fn final_state(
        &self,
        inputs: &[f64],
        noise: Option<&[DVector<f64>]>,
    ) -> Result<DVector<f64>> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("input sequence is empty".into()));
        }
        if let Some(noise) = noise {
            crate::error::check_len(inputs.len(), noise.len())?;
        }
        let mut x = DVector::zeros(self.nodes());
        for (t, &s) in inputs.iter().enumerate() {
            let mut next = &self.weights * &x;
            next.axpy(s, &self.feedforward, 1.0);
            if let Some(noise) = noise {
                next += &noise[t];
            }
            x = next;
        }
        Ok(x)
    }

    /// Measurement matrix for a recovery window of length `l`.
    pub fn assemble_operator(&self, l: usize) -> Result<MeasurementEnsemble> {
        if l == 0 {
            return Err(Error::InvalidArgument(
                "recovery length must be at least 1".into(),
            ));
        }
        let m = self.nodes();
        let mut a = DMatrix::zeros(m, l);
        let mut col = self.feedforward.clone();
        for k in 0..l {
            a.set_column(k, &col);
            if k + 1 < l {
                col = &self.weights * col;
            }
        }
        Ok(MeasurementEnsemble {
            matrix: a,
            eigenvectors: self.eigenvectors.clone(),
            projected_feedforward: self.projected_feedforward.clone(),
            eigenvalues: self.eigenvalues.clone(),
            recovery_length: l,
        })
    }

    /// Per-step Gaussian noise with standard deviation `sigma`.
    pub fn draw_noise<R: Rng + ?Sized>(
        &self,
        steps: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Vec<DVector<f64>> {
        (0..steps)
            .map(|_| {
                DVector::from_fn(self.nodes(), |_, _| {
                    sigma * rng.sample::<f64, _>(StandardNormal)
                })
            })
            .collect()
    }

    /// Accumulated noise `sum_k W^{T-k} noise[k]` at the end of the sequence.
    pub fn accumulated_noise(&self, noise: &[DVector<f64>]) -> DVector<f64> {
        let mut x = DVector::zeros(self.nodes());
        for e in noise {
            x = &self.weights * x + e;
        }
        x
    }

    /// Per-step noise level such that the accumulated noise after `steps`
    /// steps has root-mean-square norm `target`, estimated from `pilot_draws`
    /// unit-variance pilot runs.
    pub fn calibrate_noise<R: Rng + ?Sized>(
        &self,
        steps: usize,
        target: f64,
        pilot_draws: usize,
        rng: &mut R,
    ) -> f64 {
        if target <= 0.0 || steps == 0 {
            return 0.0;
        }
        let draws = pilot_draws.max(1);
        let mean_sq = (0..draws)
            .map(|_| {
                let pilot = self.draw_noise(steps, 1.0, rng);
                self.accumulated_noise(&pilot).norm_squared()
            })
            .sum::<f64>()
            / draws as f64;
        if mean_sq == 0.0 {
            0.0
        } else {
            target / mean_sq.sqrt()
        }
    }
}

/// Convenience wrapper for [`Network::build`].
pub fn build_network(spec: &NetworkSpec) -> Result<Network> {
    Network::build(spec)
}

/// The `M x L` operator binding a network to a recovery window.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    /// `A`, column `k` equal to `W^k z` (zero-based).
    pub matrix: DMatrix<f64>,
    pub eigenvectors: DMatrix<Complex64>,
    pub projected_feedforward: DVector<Complex64>,
    pub eigenvalues: DVector<Complex64>,
    pub recovery_length: usize,
}

impl MeasurementEnsemble {
    pub fn nodes(&self) -> usize {
        self.matrix.nrows()
    }

    /// `F[k, l] = d_k^l` (zero-based `l`).
    pub fn vandermonde(&self) -> DMatrix<Complex64> {
        let m = self.eigenvalues.len();
        let l = self.recovery_length;
        let mut f = DMatrix::from_element(m, l, Complex64::new(0.0, 0.0));
        for k in 0..m {
            let d = self.eigenvalues[k];
            let mut p = Complex64::new(1.0, 0.0);
            for c in 0..l {
                f[(k, c)] = p;
                p *= d;
            }
        }
        f
    }

    /// `U Z F` as a complex matrix.
    pub fn factored_product(&self) -> DMatrix<Complex64> {
        let mut zf = self.vandermonde();
        for (k, mut row) in zf.row_iter_mut().enumerate() {
            row *= self.projected_feedforward[k];
        }
        &self.eigenvectors * zf
    }

    /// Relative Frobenius distance between `A` and the real part of `U Z F`,
    /// and the largest imaginary entry of `U Z F`.
    pub fn factored_residual(&self) -> (f64, f64) {
        let prod = self.factored_product();
        let imag = prod.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        let diff = prod.map(|c| c.re) - &self.matrix;
        let scale = self.matrix.norm().max(f64::MIN_POSITIVE);
        (diff.norm() / scale, imag)
    }

    /// `A x` for a recovery-window input `x` (most recent sample first).
    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        crate::error::check_len(self.recovery_length, x.len())?;
        Ok(&self.matrix * DVector::from_column_slice(x))
    }
}

/// Composite RIP constants of `U F` when `U` has condition number
/// `gamma = sigma_max^2 / sigma_min^2` and `F` satisfies RIP with `(delta, c)`.
///
/// Returns `(delta', c')`.
pub fn composite_rip_constants(
    delta: f64,
    gamma: f64,
    c: f64,
    sigma_max2: f64,
    sigma_min2: f64,
) -> Result<(f64, f64)> {
    if !(gamma >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "conditioning ratio gamma must be at least 1, got {gamma}"
        )));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "RIP conditioning must lie in [0, 1), got {delta}"
        )));
    }
    let ratio = (gamma - 1.0) / (gamma + 1.0);
    let delta_prime = (ratio + delta) / (1.0 + delta * ratio);
    let c_prime = 0.5 * c * (sigma_max2 + sigma_min2 + delta * (sigma_max2 - sigma_min2));
    Ok((delta_prime, c_prime))
}
