//! Orthonormal sparsity bases and sparse-signal synthesis.
//!
//! Every basis is an exactly orthonormal `N x N` transform `Psi`. Coefficients
//! `a` map to samples through [`SparsityBasis::apply`] (`s = Psi a`) and back
//! through [`SparsityBasis::analyze`] (`a = Psi^T s`). Wavelet bases use
//! periodized two-channel filter banks with the coefficient layout
//! `[approx_L | detail_L | detail_{L-1} | ... | detail_1]`.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Default wavelet decomposition depth.
pub const DEFAULT_LEVELS: usize = 4;

/// Lowpass synthesis filter of the 10-tap Daubechies wavelet (5 vanishing moments).
pub const DAUBECHIES10_LOWPASS: [f64; 10] = [
    0.160_102_397_974_192_93,
    0.603_829_269_797_189_6,
    0.724_308_528_437_772_9,
    0.138_428_145_901_320_74,
    -0.242_294_887_066_382_03,
    -0.032_244_869_584_638_375,
    0.077_571_493_840_045_72,
    -0.006_241_490_212_798_274,
    -0.012_580_751_999_081_999,
    0.003_335_725_285_473_771_2,
];

/// Lowpass synthesis filter of the 6-tap least-asymmetric Symlet (3 vanishing moments).
pub const SYMLET3_LOWPASS: [f64; 6] = [
    0.332_670_552_950_082_63,
    0.806_891_509_311_092_5,
    0.459_877_502_118_491_54,
    -0.135_011_020_010_254_58,
    -0.085_441_273_882_026_66,
    0.035_226_291_885_709_53,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Canonical,
    Dct,
    Daubechies10,
    Symlet3,
}

impl BasisKind {
    pub const ALL: [BasisKind; 4] = [
        BasisKind::Canonical,
        BasisKind::Dct,
        BasisKind::Daubechies10,
        BasisKind::Symlet3,
    ];

    pub fn is_wavelet(self) -> bool {
        matches!(self, BasisKind::Daubechies10 | BasisKind::Symlet3)
    }

    fn lowpass(self) -> Option<&'static [f64]> {
        match self {
            BasisKind::Daubechies10 => Some(&DAUBECHIES10_LOWPASS),
            BasisKind::Symlet3 => Some(&SYMLET3_LOWPASS),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Canonical => "canonical",
            BasisKind::Dct => "dct",
            BasisKind::Daubechies10 => "daubechies10",
            BasisKind::Symlet3 => "symlet3",
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "canonical" | "identity" => Ok(BasisKind::Canonical),
            "dct" => Ok(BasisKind::Dct),
            "daubechies10" | "db10" | "db5" => Ok(BasisKind::Daubechies10),
            "symlet3" | "sym3" => Ok(BasisKind::Symlet3),
            other => Err(Error::InvalidArgument(format!(
                "unknown basis kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
}

/// An orthonormal transform of length `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityBasis {
    kind: BasisKind,
    length: usize,
    levels: usize,
    boundary: Boundary,
}

impl SparsityBasis {
    pub fn new(kind: BasisKind, length: usize) -> Result<Self> {
        Self::with_levels(kind, length, DEFAULT_LEVELS)
    }

    pub fn with_levels(kind: BasisKind, length: usize, levels: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidArgument(
                "basis length must be positive".into(),
            ));
        }
        if kind.is_wavelet()
            && (levels == 0
                || levels >= usize::BITS as usize
                || !length.is_multiple_of(1usize << levels))
        {
            return Err(Error::InvalidLevels { length, levels });
        }
        Ok(Self {
            kind,
            length,
            levels,
            boundary: Boundary::Periodic,
        })
    }

    pub fn canonical(length: usize) -> Self {
        Self {
            kind: BasisKind::Canonical,
            length,
            levels: DEFAULT_LEVELS,
            boundary: Boundary::Periodic,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Synthesis: `s = Psi a`.
    pub fn apply(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.length, coeffs.len())?;
        Ok(match self.kind {
            BasisKind::Canonical => coeffs.to_vec(),
            BasisKind::Dct => dct::inverse(coeffs),
            BasisKind::Daubechies10 | BasisKind::Symlet3 => {
                wavelet_synthesis(self.kind.lowpass().unwrap(), coeffs, self.levels)
            }
        })
    }

    /// Analysis: `a = Psi^T s`, the inverse of [`apply`](Self::apply).
    pub fn analyze(&self, samples: &[f64]) -> Result<Vec<f64>> {
        check_len(self.length, samples.len())?;
        Ok(match self.kind {
            BasisKind::Canonical => samples.to_vec(),
            BasisKind::Dct => dct::forward(samples),
            BasisKind::Daubechies10 | BasisKind::Symlet3 => {
                wavelet_analysis(self.kind.lowpass().unwrap(), samples, self.levels)
            }
        })
    }

    /// Column `n` of `Psi`, i.e. the synthesis atom of coefficient `n`.
    pub fn atom(&self, n: usize) -> Result<Vec<f64>> {
        if n >= self.length {
            return Err(Error::InvalidArgument(format!(
                "atom index {n} out of range for length {}",
                self.length
            )));
        }
        let mut e = vec![0.0; self.length];
        e[n] = 1.0;
        self.apply(&e)
    }

    /// Maximum over columns of the sup-modulus of the column's Fourier
    /// transform, evaluated on a uniform grid of `grid_points` frequencies.
    ///
    /// Columns with a single nonzero entry have a constant-modulus transform and
    /// are evaluated exactly, so the canonical basis yields exactly `1.0`.
    pub fn coherence(&self, grid_points: usize) -> Result<f64> {
        let n = self.length;
        if grid_points < 4 * n {
            return Err(Error::InvalidArgument(format!(
                "coherence grid needs at least 4N = {} points, got {grid_points}",
                4 * n
            )));
        }
        let fft = FftPlanner::<f64>::new().plan_fft_forward(grid_points);
        let mut buf = vec![Complex64::new(0.0, 0.0); grid_points];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut best = 0.0_f64;
        for col in 0..n {
            let atom = self.atom(col)?;
            let mut nonzero = atom.iter().filter(|v| **v != 0.0);
            let first = nonzero.next().copied();
            if nonzero.next().is_none() {
                best = best.max(first.map_or(0.0, f64::abs));
                continue;
            }
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (b, v) in buf.iter_mut().zip(&atom) {
                b.re = *v;
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
            best = best.max(peak);
        }
        Ok(best)
    }

    /// Coherence on the default `16 N` grid.
    pub fn default_coherence(&self) -> Result<f64> {
        self.coherence(16 * self.length)
    }
}

fn wavelet_step_analysis(h: &[f64], input: &[f64], approx: &mut [f64], detail: &mut [f64]) {
    let n = input.len();
    let taps = h.len();
    for k in 0..n / 2 {
        let mut a = 0.0;
        let mut d = 0.0;
        for i in 0..taps {
            let x = input[(2 * k + i) % n];
            a += h[i] * x;
            // g[i] = (-1)^i h[taps - 1 - i]
            let g = if i % 2 == 0 {
                h[taps - 1 - i]
            } else {
                -h[taps - 1 - i]
            };
            d += g * x;
        }
        approx[k] = a;
        detail[k] = d;
    }
}

fn wavelet_step_synthesis(h: &[f64], approx: &[f64], detail: &[f64], output: &mut [f64]) {
    let n = output.len();
    let taps = h.len();
    output.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..n / 2 {
        for i in 0..taps {
            let g = if i % 2 == 0 {
                h[taps - 1 - i]
            } else {
                -h[taps - 1 - i]
            };
            output[(2 * k + i) % n] += h[i] * approx[k] + g * detail[k];
        }
    }
}

fn wavelet_analysis(h: &[f64], samples: &[f64], levels: usize) -> Vec<f64> {
    let mut out = samples.to_vec();
    let mut len = samples.len();
    let mut approx = vec![0.0; len / 2];
    let mut detail = vec![0.0; len / 2];
    for _ in 0..levels {
        let half = len / 2;
        wavelet_step_analysis(h, &out[..len], &mut approx[..half], &mut detail[..half]);
        out[..half].copy_from_slice(&approx[..half]);
        out[half..len].copy_from_slice(&detail[..half]);
        len = half;
    }
    out
}

fn wavelet_synthesis(h: &[f64], coeffs: &[f64], levels: usize) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = coeffs.to_vec();
    let mut buf = vec![0.0; n];
    for level in (1..=levels).rev() {
        let len = n >> (level - 1);
        let half = len / 2;
        wavelet_step_synthesis(h, &out[..half], &out[half..len], &mut buf[..len]);
        out[..len].copy_from_slice(&buf[..len]);
    }
    out
}

/// Orthonormal DCT-II / DCT-III through a single complex FFT of length `N`.
mod dct {
    use std::f64::consts::PI;

    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    /// Orthonormal DCT-II.
    pub(super) fn forward(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (i, &xi) in x.iter().enumerate() {
            let pos = if i % 2 == 0 {
                i / 2
            } else {
                n - 1 - (i - 1) / 2
            };
            v[pos].re = xi;
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut v);
        let (w0, wk) = ((1.0 / n as f64).sqrt(), (2.0 / n as f64).sqrt());
        v.iter()
            .enumerate()
            .map(|(k, vk)| {
                let tw = Complex64::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64));
                (tw * vk).re * if k == 0 { w0 } else { wk }
            })
            .collect()
    }

    /// Orthonormal DCT-III, the inverse of [`forward`].
    pub(super) fn inverse(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        // Rescale so that y is the unnormalized DCT-II of the output.
        let y: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(k, ak)| {
                if k == 0 {
                    ak * (n as f64).sqrt()
                } else {
                    ak * (n as f64 / 2.0).sqrt()
                }
            })
            .collect();
        let mut v: Vec<Complex64> = (0..n)
            .map(|k| {
                let mirror = if k == 0 { 0.0 } else { y[n - k] };
                Complex64::from_polar(1.0, PI * k as f64 / (2.0 * n as f64))
                    * Complex64::new(y[k], -mirror)
            })
            .collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut v);
        let scale = 1.0 / n as f64;
        let mut x = vec![0.0; n];
        for (i, xi) in x.iter_mut().enumerate() {
            let pos = if i % 2 == 0 {
                i / 2
            } else {
                n - 1 - (i - 1) / 2
            };
            *xi = v[pos].re * scale;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// Magnitudes uniform in `[lo, hi)`, positive sign.
    UniformRange { lo: f64, hi: f64 },
    /// Standard normal amplitudes.
    Gaussian,
}

impl Default for AmplitudeLaw {
    fn default() -> Self {
        AmplitudeLaw::UniformRange { lo: 0.5, hi: 1.5 }
    }
}

impl AmplitudeLaw {
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AmplitudeLaw::UniformRange { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
            AmplitudeLaw::Gaussian => rng.sample(StandardNormal),
        }
    }
}

/// A signal with exactly `k` nonzero coefficients in a given basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    pub basis: SparsityBasis,
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub samples: Vec<f64>,
}

impl SparseSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }
}

/// Draws a `k`-sparse coefficient vector with a uniformly random support.
pub fn make_sparse_signal(
    basis: &SparsityBasis,
    k: usize,
    law: AmplitudeLaw,
    seed: u64,
) -> Result<SparseSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    make_sparse_signal_with(basis, k, law, &mut rng)
}

pub(crate) fn make_sparse_signal_with<R: Rng + ?Sized>(
    basis: &SparsityBasis,
    k: usize,
    law: AmplitudeLaw,
    rng: &mut R,
) -> Result<SparseSignal> {
    let n = basis.len();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity {k} exceeds signal length {n}"
        )));
    }
    if let AmplitudeLaw::UniformRange { lo, hi } = law {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!(
                "uniform amplitude range [{lo}, {hi}) must be positive and ordered"
            )));
        }
    }
    let mut support = index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let mut coefficients = vec![0.0; n];
    for &i in &support {
        let mut v = law.sample(rng);
        while v == 0.0 {
            v = law.sample(rng);
        }
        coefficients[i] = v;
    }
    let samples = basis.apply(&coefficients)?;
    Ok(SparseSignal {
        basis: *basis,
        support,
        coefficients,
        samples,
    })
}
