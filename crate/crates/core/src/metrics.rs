//! Mode histograms and the divergences computed from them, plus the
//! classifier-based surrogate scores.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Default additive smoothing for empty bins.
pub const KL_SMOOTHING: f64 = 1e-6;

/// Floor on expected counts in the Pearson statistic.
pub const CHI_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeHistogram {
    pub counts: Vec<u64>,
}

impl ModeHistogram {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Self> {
        let mut counts = vec![0u64; classes];
        for &l in labels {
            *counts
                .get_mut(l)
                .ok_or_else(|| Error::InvalidSpec(format!("label {l} outside {classes} classes")))? += 1;
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn require_mass(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidSpec("histogram is empty".into()));
        }
        Ok(())
    }
}

/// Labels every row of `samples` and counts per class.
pub fn histogram_of(samples: &Tensor, classes: usize, labeler: impl Fn(&[f64]) -> usize) -> Result<ModeHistogram> {
    if samples.is_empty() || samples.rank() != 2 {
        return Err(Error::InvalidSpec("no samples to label".into()));
    }
    let labels: Vec<usize> = (0..samples.rows()).map(|r| labeler(samples.row(r))).collect();
    ModeHistogram::from_labels(&labels, classes)
}

fn same_classes(p: &ModeHistogram, q: &ModeHistogram) -> Result<()> {
    if p.classes() != q.classes() {
        return Err(Error::InvalidSpec(format!(
            "histograms have {} and {} classes",
            p.classes(),
            q.classes()
        )));
    }
    p.require_mass()?;
    q.require_mass()
}

/// `KL(p ‖ q)` over smoothed proportions `(count + ε) / (total + C·ε)`.
pub fn kl_divergence(p: &ModeHistogram, q: &ModeHistogram, smoothing: f64) -> Result<f64> {
    same_classes(p, q)?;
    let c = p.classes() as f64;
    let (pt, qt) = (p.total() as f64 + c * smoothing, q.total() as f64 + c * smoothing);
    Ok(p.counts
        .iter()
        .zip(&q.counts)
        .map(|(&pc, &qc)| {
            let pj = (pc as f64 + smoothing) / pt;
            let qj = (qc as f64 + smoothing) / qt;
            if pj == 0.0 {
                0.0
            } else {
                pj * (pj / qj).ln()
            }
        })
        .sum())
}

/// Pearson's statistic `Σ (O - E)² / max(E, floor)` with the expected
/// histogram rescaled to the observed total.
pub fn chi_square(observed: &ModeHistogram, expected: &ModeHistogram) -> Result<f64> {
    same_classes(observed, expected)?;
    let scale = observed.total() as f64 / expected.total() as f64;
    Ok(observed
        .counts
        .iter()
        .zip(&expected.counts)
        .map(|(&o, &e)| {
            let e = e as f64 * scale;
            let diff = o as f64 - e;
            diff * diff / e.max(CHI_FLOOR)
        })
        .sum())
}

/// Number of classes with at least `min_count` samples.
pub fn modes_covered(hist: &ModeHistogram, min_count: u64) -> usize {
    let min_count = min_count.max(1);
    hist.counts.iter().filter(|&&c| c >= min_count).count()
}

/// `exp(E_x[KL(p(y|x) ‖ p(y))])` from a row-per-sample probability matrix,
/// with `p(y)` the mean row.
pub fn mode_score(probabilities: &Tensor) -> Result<f64> {
    if probabilities.rank() != 2 || probabilities.rows() < 100 {
        return Err(Error::InvalidSpec("mode score needs at least 100 samples".into()));
    }
    let (n, c) = (probabilities.rows(), probabilities.cols());
    let mut marginal = vec![0.0; c];
    for r in 0..n {
        for (m, p) in marginal.iter_mut().zip(probabilities.row(r)) {
            *m += p;
        }
    }
    marginal.iter_mut().for_each(|m| *m /= n as f64);
    let mut total = 0.0;
    for r in 0..n {
        for (p, m) in probabilities.row(r).iter().zip(&marginal) {
            if *p > 0.0 {
                total += p * (p / m).ln();
            }
        }
    }
    Ok((total / n as f64).exp())
}

/// Sample mean and unbiased covariance of the rows of `x`.
pub fn moments(x: &Tensor) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let m = DMatrix::from_row_slice(n, d, x.data());
    let mean = DVector::from_iterator(d, (0..d).map(|j| m.column(j).mean()));
    let mut centered = m;
    for j in 0..d {
        let mu = mean[j];
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    (mean, cov)
}

fn symmetric_eigenvalues(m: DMatrix<f64>) -> Result<DVector<f64>> {
    let sym = (&m + m.transpose()) * 0.5;
    let norm = sym.norm();
    let min_diag = sym.diagonal().min();
    SymmetricEigen::try_new(sym, 1e-14, 10_000)
        .map(|e| e.eigenvalues)
        .ok_or_else(|| Error::Eigen(format!("no convergence (frobenius norm {norm:e}, smallest diagonal {min_diag:e})")))
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let norm = sym.norm();
    let eig = SymmetricEigen::try_new(sym, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence (frobenius norm {norm:e})")))?;
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `‖μ_r - μ_f‖² + Tr(Σ_r + Σ_f - 2 (Σ_r Σ_f)^{1/2})`.
///
/// The trace of the square root is taken through the symmetric matrix
/// `Σ_r^{1/2} Σ_f Σ_r^{1/2}`, which shares eigenvalues with `Σ_r Σ_f`;
/// negative eigenvalues are clipped to zero.
pub fn frechet_from_moments(
    mu_r: &DVector<f64>,
    cov_r: &DMatrix<f64>,
    mu_f: &DVector<f64>,
    cov_f: &DMatrix<f64>,
) -> Result<f64> {
    let root_r = psd_sqrt(cov_r)?;
    let inner = &root_r * cov_f * &root_r;
    let tr_sqrt: f64 = symmetric_eigenvalues(inner)?.iter().map(|l| l.max(0.0).sqrt()).sum();
    let diff = mu_r - mu_f;
    Ok(diff.dot(&diff) + cov_r.trace() + cov_f.trace() - 2.0 * tr_sqrt)
}

/// Fréchet distance between Gaussian fits of two feature sets.
pub fn frechet_distance(real: &Tensor, fake: &Tensor) -> Result<f64> {
    let d = real.cols();
    if fake.cols() != d {
        return Err(Error::InvalidSpec(format!("feature widths {d} and {}", fake.cols())));
    }
    if d > 64 {
        return Err(Error::InvalidSpec(format!("feature width {d} exceeds 64")));
    }
    if real.rows() <= d || fake.rows() <= d {
        return Err(Error::InvalidSpec(format!("need more than {d} samples per side")));
    }
    let (mu_r, cov_r) = moments(real);
    let (mu_f, cov_f) = moments(fake);
    frechet_from_moments(&mu_r, &cov_r, &mu_f, &cov_f)
}

/// One row of evaluation results. Classifier-based scores are surrogates,
/// not comparable to Inception-network numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub kl_divergence: f64,
    pub chi_square: f64,
    pub modes_covered: usize,
    pub surrogate_mode_score: f64,
    pub surrogate_frechet: f64,
    pub sample_count: usize,
    pub classifier_accuracy: f64,
}

pub const EVAL_HEADER: &str = "variant,seed,kl,chi2,modes_covered,mode_score,frechet,n,clf_acc";

impl EvalReport {
    pub fn csv_row(&self, variant: &str, seed: u64) -> String {
        format!(
            "{variant},{seed},{:?},{:?},{},{:?},{:?},{},{:?}",
            self.kl_divergence,
            self.chi_square,
            self.modes_covered,
            self.surrogate_mode_score,
            self.surrogate_frechet,
            self.sample_count,
            self.classifier_accuracy
        )
    }
}
