//! Statistical inputs and uncertainty-set radii for one in-sample window.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::market_data::ReturnsPanel;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// What to do when a covariance matrix has negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdPolicy {
    /// Symmetrize, then clip negative eigenvalues at zero.
    #[default]
    Repair,
    /// Fail on anything beyond round-off.
    Strict,
}

/// Relative eigenvalue slack treated as round-off in strict mode.
const PSD_SLACK: f64 = 1e-10;

/// Column means and covariance (divisor `T - 1`).
pub fn sample_moments(values: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), EstimationError> {
    let t = values.nrows();
    if t < 2 {
        return Err(EstimationError::TooFewObservations { needed: 2, got: t });
    }
    let n = values.ncols();
    // two-pass mean: the correction makes constant columns exact
    let mean = DVector::from_iterator(
        n,
        (0..n).map(|j| {
            let col = values.column(j);
            let m = col.sum() / t as f64;
            m + col.iter().map(|v| v - m).sum::<f64>() / t as f64
        }),
    );
    let mut cov = DMatrix::zeros(n, n);
    for r in 0..t {
        for i in 0..n {
            let di = values[(r, i)] - mean[i];
            for j in i..n {
                cov[(i, j)] += di * (values[(r, j)] - mean[j]);
            }
        }
    }
    let denom = (t - 1) as f64;
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, cov))
}

/// Symmetrizes `m` and clips negative eigenvalues at zero.
pub fn repair_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    // restore exact symmetry after the product
    let n = out.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn check_square(m: &DMatrix<f64>) -> Result<(), EstimationError> {
    if m.nrows() != m.ncols() {
        return Err(EstimationError::NotSquare(m.nrows(), m.ncols()));
    }
    Ok(())
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Lower-triangular `C` with `C Cᵀ = sigma`, tolerating semidefinite input.
///
/// Zero pivots (relative to the largest diagonal entry) zero out their column.
/// Under [`PsdPolicy::Repair`] an indefinite matrix is first projected onto
/// the PSD cone; under [`PsdPolicy::Strict`] it is rejected.
pub fn cholesky(sigma: &DMatrix<f64>, policy: PsdPolicy) -> Result<DMatrix<f64>, EstimationError> {
    check_square(sigma)?;
    let scale = sigma.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let asym = max_asymmetry(sigma);
    if asym > 1e-8 * scale && policy == PsdPolicy::Strict {
        return Err(EstimationError::NotSymmetric(asym));
    }
    let target = match policy {
        PsdPolicy::Repair => repair_psd(sigma),
        PsdPolicy::Strict => {
            let sym = (sigma + sigma.transpose()) * 0.5;
            let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
            if min_eig < -PSD_SLACK * scale {
                return Err(EstimationError::NotPsd(min_eig));
            }
            sym
        }
    };
    Ok(semidefinite_cholesky(&target))
}

fn semidefinite_cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)]));
    let tiny = 1e-13 * max_diag.max(1e-300);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tiny {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    l
}

/// Box radii `δ_i = z σ_i / √T` from a window.
pub fn box_deltas(values: &DMatrix<f64>, z: f64) -> Result<DVector<f64>, EstimationError> {
    if !(z >= 0.0) {
        return Err(EstimationError::InvalidParameter(format!("z must be >= 0, got {z}")));
    }
    let (_, cov) = sample_moments(values)?;
    let t = values.nrows() as f64;
    Ok(DVector::from_iterator(
        cov.nrows(),
        (0..cov.nrows()).map(|i| z * cov[(i, i)].max(0.0).sqrt() / t.sqrt()),
    ))
}

/// `Σ_μ = Σ / T`.
pub fn estimation_error_cov(sigma: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>, EstimationError> {
    if t == 0 {
        return Err(EstimationError::InvalidParameter("T must be >= 1".into()));
    }
    Ok(sigma / t as f64)
}

// Lanczos approximation (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let gln = ln_gamma(a);
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() - x + a * x.ln() - gln).exp().min(1.0)
    } else {
        // continued fraction for Q, modified Lentz
        let fpmin = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / fpmin;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < fpmin {
                d = fpmin;
            }
            c = b + an / c;
            if c.abs() < fpmin {
                c = fpmin;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - gln).exp() * h;
        (1.0 - q).max(0.0)
    }
}

/// Chi-square CDF with `df` degrees of freedom.
pub fn chi_square_cdf(x: f64, df: usize) -> f64 {
    regularized_gamma_p(df as f64 / 2.0, x / 2.0)
}

/// Inverse chi-square CDF: the `x` with `P(df/2, x/2) = p`.
pub fn chi_square_quantile(p: f64, df: usize) -> Result<f64, EstimationError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(EstimationError::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    if df == 0 {
        return Err(EstimationError::InvalidParameter("df must be >= 1".into()));
    }
    let k = df as f64;
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while chi_square_cdf(hi, df) < p {
        lo = hi;
        hi *= 2.0;
    }
    // Newton steps safeguarded by the bracket.
    let mut x = 0.5 * (lo + hi);
    let half = k / 2.0;
    let log_norm = half * 2f64.ln() + ln_gamma(half);
    for _ in 0..200 {
        let f = chi_square_cdf(x, df) - p;
        if f.abs() < 1e-15 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((half - 1.0) * x.ln() - x / 2.0 - log_norm).exp();
        let newton = x - f / density;
        x = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn euclid_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm()
}

/// Joint-set distance `‖μ − μ̂‖₂ + c ‖Σ − Σ̂‖_F`.
pub fn moment_distance(
    mu: &DVector<f64>,
    mu_hat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    c: f64,
) -> f64 {
    euclid_diff(mu, mu_hat) + c * frobenius_diff(sigma, sigma_hat)
}

/// Nearest-rank percentile of an unsorted sample (`pct` in `(0, 1]`).
pub fn nearest_rank_percentile(values: &mut [f64], pct: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = (pct * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Parameters of the bootstrap that sizes the joint (mean, covariance) set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    /// Rows per resample.
    pub sample_len: usize,
    pub draws: usize,
    pub percentile: f64,
    /// Weight of the covariance term.
    pub c: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            sample_len: 63,
            draws: 1000,
            percentile: 0.95,
            c: 1.0,
        }
    }
}

/// Percentile of `‖μ_b − μ̂‖ + c‖Σ_b − Σ̂‖_F` over i.i.d. row resamples.
///
/// Draw `b` uses its own ChaCha stream so the result does not depend on the
/// order in which draws are evaluated.
pub fn bootstrap_epsilon(
    values: &DMatrix<f64>,
    cfg: &BootstrapConfig,
    seed: u64,
) -> Result<f64, EstimationError> {
    let t = values.nrows();
    if cfg.sample_len < 2 || cfg.sample_len > t {
        return Err(EstimationError::InvalidParameter(format!(
            "bootstrap sample length {} must lie in 2..={t}",
            cfg.sample_len
        )));
    }
    if cfg.draws == 0 {
        return Err(EstimationError::InvalidParameter("bootstrap needs at least one draw".into()));
    }
    if !(cfg.percentile > 0.0 && cfg.percentile <= 1.0) {
        return Err(EstimationError::InvalidParameter(format!(
            "percentile must lie in (0, 1], got {}",
            cfg.percentile
        )));
    }
    if !(cfg.c >= 0.0) {
        return Err(EstimationError::InvalidParameter("c must be >= 0".into()));
    }
    let (mu_hat, sigma_hat) = sample_moments(values)?;
    let n = values.ncols();
    let mut dists = Vec::with_capacity(cfg.draws);
    let mut sample = DMatrix::zeros(cfg.sample_len, n);
    for b in 0..cfg.draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        for r in 0..cfg.sample_len {
            let src = rng.gen_range(0..t);
            sample.row_mut(r).copy_from(&values.row(src));
        }
        let (mu_b, sigma_b) = sample_moments(&sample)?;
        dists.push(moment_distance(&mu_b, &mu_hat, &sigma_b, &sigma_hat, cfg.c));
    }
    Ok(nearest_rank_percentile(&mut dists, cfg.percentile))
}

/// Knobs for [`EstimateSet::from_window`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Normal quantile for the box radii.
    pub z: f64,
    /// Chi-square confidence level for the ellipsoid radius.
    pub chi2_level: f64,
    /// Chi-square degrees of freedom; `None` means the number of assets.
    pub chi2_df: Option<usize>,
    pub bootstrap: BootstrapConfig,
    pub psd_policy: PsdPolicy,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            z: 1.96,
            chi2_level: 0.95,
            chi2_df: None,
            bootstrap: BootstrapConfig::default(),
            psd_policy: PsdPolicy::Repair,
        }
    }
}

/// Every statistical input the models need for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub mu_hat: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Lower-triangular factor of `sigma_mu`.
    pub chol: DMatrix<f64>,
    pub box_delta: DVector<f64>,
    pub ellipsoid_delta: f64,
    pub sigma_mu: DMatrix<f64>,
    pub epsilon: f64,
    pub t: usize,
}

impl EstimateSet {
    pub fn from_window(
        window: &ReturnsPanel,
        cfg: &EstimationConfig,
        seed: u64,
    ) -> Result<Self, EstimationError> {
        let values = window.values();
        let t = values.nrows();
        let (mu_hat, sigma) = sample_moments(values)?;
        let sigma_mu = estimation_error_cov(&sigma, t)?;
        let chol = cholesky(&sigma_mu, cfg.psd_policy)?;
        let box_delta = box_deltas(values, cfg.z)?;
        let df = cfg.chi2_df.unwrap_or(values.ncols());
        let ellipsoid_delta = chi_square_quantile(cfg.chi2_level, df)?.sqrt();
        let mut boot = cfg.bootstrap;
        boot.sample_len = boot.sample_len.min(t);
        let epsilon = bootstrap_epsilon(values, &boot, seed)?;
        Ok(Self {
            mu_hat,
            sigma,
            chol,
            box_delta,
            ellipsoid_delta,
            sigma_mu,
            epsilon,
            t,
        })
    }
}
