//! Synthetic datasets whose modes are known exactly.
//!
//! Two families: isotropic Gaussian mixtures in the plane (ring and grid
//! layouts) and binary pattern canvases built by placing one of `K` base
//! patterns in each of `Q` quadrants, giving `K^Q` modes.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    pub centers: Vec<Vec<f64>>,
    pub std: f64,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(centers: Vec<Vec<f64>>, std: f64, weights: Vec<f64>) -> Result<Self> {
        let spec = Self {
            centers,
            std,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Equally weighted mixture.
    pub fn uniform(centers: Vec<Vec<f64>>, std: f64) -> Result<Self> {
        let k = centers.len().max(1);
        Self::new(centers, std, vec![1.0 / k as f64; k])
    }

    /// `k` centers equally spaced on a circle, the first at angle 0.
    pub fn ring(k: usize, radius: f64, std: f64) -> Result<Self> {
        let centers = (0..k)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / k as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self::uniform(centers, std)
    }

    /// `side × side` lattice centred on the origin: coordinate `i` sits at
    /// `(i - (side - 1) / 2) * spacing`. Row-major index, x varying fastest.
    pub fn grid(side: usize, spacing: f64, std: f64) -> Result<Self> {
        let off = (side as f64 - 1.0) / 2.0;
        let mut centers = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                centers.push(vec![
                    (col as f64 - off) * spacing,
                    (row as f64 - off) * spacing,
                ]);
            }
        }
        Self::uniform(centers, std)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.centers.len();
        if k == 0 {
            return Err(Error::InvalidSpec("mixture needs at least one center".into()));
        }
        if !(self.std > 0.0) {
            return Err(Error::InvalidSpec(format!("std must be positive, got {}", self.std)));
        }
        if self.weights.len() != k {
            return Err(Error::InvalidSpec("one weight per center".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidSpec(format!("weights sum to {total}")));
        }
        let d = self.centers[0].len();
        if d == 0 || self.centers.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidSpec("centers must share a positive dimension".into()));
        }
        for i in 0..k {
            for j in 0..i {
                if self.centers[i] == self.centers[j] {
                    return Err(Error::InvalidSpec(format!("centers {j} and {i} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// Draws `n` labelled points from an existing stream.
    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> LabeledBatch {
        let d = self.dim();
        let mut samples = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut j = self.weights.len() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    j = i;
                    break;
                }
            }
            for &c in &self.centers[j] {
                let e: f64 = StandardNormal.sample(rng);
                samples.push(c + self.std * e);
            }
            labels.push(j);
        }
        LabeledBatch::new(samples, n, d, labels, self.mode_count())
    }

    pub fn sample(&self, n: usize, seed: u64) -> LabeledBatch {
        self.sample_with(n, &mut rng::stream(seed, "data"))
    }

    /// Index of the nearest center, lowest index on ties.
    pub fn true_mode_of(&self, point: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in self.centers.iter().enumerate() {
            let d: f64 = c.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }
}

/// Samples from a ring mixture; see [`MixtureSpec::ring`].
pub fn sample_ring(k: usize, radius: f64, std: f64, n: usize, seed: u64) -> Result<LabeledBatch> {
    Ok(MixtureSpec::ring(k, radius, std)?.sample(n, seed))
}

/// Samples from a lattice mixture; see [`MixtureSpec::grid`].
pub fn sample_grid(side: usize, spacing: f64, std: f64, n: usize, seed: u64) -> Result<LabeledBatch> {
    Ok(MixtureSpec::grid(side, spacing, std)?.sample(n, seed))
}

/// Binary pattern canvases.
///
/// With one quadrant the canvas is the `side × side` pattern itself. With
/// three, the canvas is `2·side × 2·side`, quadrants filled top-left,
/// top-right, bottom-left, and the bottom-right quadrant left blank.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternDatasetSpec {
    /// Row-major `side × side` binary images.
    pub base_patterns: Vec<Vec<u8>>,
    pub side: usize,
    pub quadrant_count: usize,
    pub noise_flip_prob: f64,
}

impl PatternDatasetSpec {
    pub fn new(
        base_patterns: Vec<Vec<u8>>,
        side: usize,
        quadrant_count: usize,
        noise_flip_prob: f64,
    ) -> Result<Self> {
        let spec = Self {
            base_patterns,
            side,
            quadrant_count,
            noise_flip_prob,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `k` random patterns whose pairwise Hamming distance is at least
    /// `side² / 4`.
    pub fn generate(
        k: usize,
        side: usize,
        quadrant_count: usize,
        noise_flip_prob: f64,
        seed: u64,
    ) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidSpec("pattern side must be positive".into()));
        }
        let pixels = side * side;
        let min_distance = (pixels / 4).max(1);
        let mut rng = rng::stream(seed, "patterns");
        let mut patterns: Vec<Vec<u8>> = Vec::with_capacity(k);
        let mut attempts = 0usize;
        while patterns.len() < k {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::InvalidSpec(format!(
                    "cannot place {k} separated {side}x{side} patterns"
                )));
            }
            let p: Vec<u8> = (0..pixels).map(|_| u8::from(rng.random::<bool>())).collect();
            let ones = p.iter().filter(|&&v| v == 1).count();
            if ones == 0 || ones == pixels {
                continue;
            }
            let separated = patterns.iter().all(|q| {
                q.iter().zip(&p).filter(|(a, b)| a != b).count() >= min_distance
            });
            if separated {
                patterns.push(p);
            }
        }
        Self::new(patterns, side, quadrant_count, noise_flip_prob)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.base_patterns.len();
        if k < 2 {
            return Err(Error::InvalidSpec("need at least two base patterns".into()));
        }
        if !matches!(self.quadrant_count, 1 | 3) {
            return Err(Error::InvalidSpec(format!(
                "quadrant count must be 1 or 3, got {}",
                self.quadrant_count
            )));
        }
        if !(0.0..0.5).contains(&self.noise_flip_prob) {
            return Err(Error::InvalidSpec(format!(
                "flip probability {} outside [0, 0.5)",
                self.noise_flip_prob
            )));
        }
        let pixels = self.side * self.side;
        if self.canvas_side() > 16 {
            return Err(Error::InvalidSpec("canvas larger than 16x16".into()));
        }
        for (i, p) in self.base_patterns.iter().enumerate() {
            if p.len() != pixels || p.iter().any(|&v| v > 1) {
                return Err(Error::InvalidSpec(format!("pattern {i} is not a binary {0}x{0} image", self.side)));
            }
            if self.base_patterns[..i].contains(p) {
                return Err(Error::InvalidSpec(format!("pattern {i} repeats an earlier one")));
            }
        }
        Ok(())
    }

    pub fn pattern_count(&self) -> usize {
        self.base_patterns.len()
    }

    pub fn canvas_side(&self) -> usize {
        if self.quadrant_count == 1 {
            self.side
        } else {
            2 * self.side
        }
    }

    pub fn dim(&self) -> usize {
        self.canvas_side() * self.canvas_side()
    }

    pub fn mode_count(&self) -> usize {
        self.pattern_count().pow(self.quadrant_count as u32)
    }

    /// Pixel offset (row, col) of quadrant `q`.
    fn quadrant_origin(&self, q: usize) -> (usize, usize) {
        match q {
            0 => (0, 0),
            1 => (0, self.side),
            2 => (self.side, 0),
            _ => (self.side, self.side),
        }
    }

    /// Most significant digit first: `Σ_q i_q · K^(Q-1-q)`.
    pub fn composite_label(&self, indices: &[usize]) -> usize {
        let k = self.pattern_count();
        indices.iter().fold(0, |acc, &i| acc * k + i)
    }

    pub fn label_digits(&self, label: usize) -> Vec<usize> {
        let k = self.pattern_count();
        let mut digits = vec![0; self.quadrant_count];
        let mut rest = label;
        for d in digits.iter_mut().rev() {
            *d = rest % k;
            rest /= k;
        }
        digits
    }

    /// Noise-free canvas for a tuple of pattern indices.
    pub fn render(&self, indices: &[usize]) -> Vec<f64> {
        let cs = self.canvas_side();
        let mut canvas = vec![0.0; cs * cs];
        for (q, &i) in indices.iter().enumerate() {
            let (r0, c0) = self.quadrant_origin(q);
            let p = &self.base_patterns[i];
            for r in 0..self.side {
                for c in 0..self.side {
                    canvas[(r0 + r) * cs + c0 + c] = f64::from(p[r * self.side + c]);
                }
            }
        }
        canvas
    }

    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> LabeledBatch {
        let k = self.pattern_count();
        let d = self.dim();
        let mut samples = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        let mut idx = vec![0; self.quadrant_count];
        for _ in 0..n {
            for i in idx.iter_mut() {
                *i = rng.random_range(0..k);
            }
            let mut canvas = self.render(&idx);
            if self.noise_flip_prob > 0.0 {
                for v in canvas.iter_mut() {
                    if rng.random::<f64>() < self.noise_flip_prob {
                        *v = 1.0 - *v;
                    }
                }
            }
            samples.extend(canvas);
            labels.push(self.composite_label(&idx));
        }
        LabeledBatch::new(samples, n, d, labels, self.mode_count())
    }

    pub fn sample(&self, n: usize, seed: u64) -> LabeledBatch {
        self.sample_with(n, &mut rng::stream(seed, "data"))
    }

    /// Nearest base pattern (squared distance, lowest index on ties) in each
    /// filled quadrant, combined into the composite label.
    pub fn mode_of(&self, canvas: &[f64]) -> usize {
        let cs = self.canvas_side();
        let digits: Vec<usize> = (0..self.quadrant_count)
            .map(|q| {
                let (r0, c0) = self.quadrant_origin(q);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (j, p) in self.base_patterns.iter().enumerate() {
                    let mut d = 0.0;
                    for r in 0..self.side {
                        for c in 0..self.side {
                            let diff = canvas[(r0 + r) * cs + c0 + c] - f64::from(p[r * self.side + c]);
                            d += diff * diff;
                        }
                    }
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                best
            })
            .collect();
        self.composite_label(&digits)
    }
}

/// Samples pattern canvases; see [`PatternDatasetSpec`].
pub fn sample_patterns(spec: &PatternDatasetSpec, n: usize, seed: u64) -> LabeledBatch {
    spec.sample(n, seed)
}

/// Either dataset family behind one interface.
#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Mixture(MixtureSpec),
    Patterns(PatternDatasetSpec),
}

impl Dataset {
    pub fn dim(&self) -> usize {
        match self {
            Dataset::Mixture(m) => m.dim(),
            Dataset::Patterns(p) => p.dim(),
        }
    }

    pub fn mode_count(&self) -> usize {
        match self {
            Dataset::Mixture(m) => m.mode_count(),
            Dataset::Patterns(p) => p.mode_count(),
        }
    }

    /// Binary image data, as opposed to continuous points.
    pub fn is_binary(&self) -> bool {
        matches!(self, Dataset::Patterns(_))
    }

    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> LabeledBatch {
        match self {
            Dataset::Mixture(m) => m.sample_with(n, rng),
            Dataset::Patterns(p) => p.sample_with(n, rng),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> LabeledBatch {
        self.sample_with(n, &mut rng::stream(seed, "data"))
    }

    /// Exact mode oracle.
    pub fn mode_of(&self, point: &[f64]) -> usize {
        match self {
            Dataset::Mixture(m) => m.true_mode_of(point),
            Dataset::Patterns(p) => p.mode_of(point),
        }
    }
}

/// Serializable description of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetConfig {
    Ring { modes: usize, radius: f64, std: f64 },
    Grid { side: usize, spacing: f64, std: f64 },
    Patterns {
        patterns: usize,
        side: usize,
        quadrants: usize,
        flip_prob: f64,
        pattern_seed: u64,
    },
}

impl Default for DatasetConfig {
    /// Eight modes on a radius-2 ring with std 0.02.
    fn default() -> Self {
        DatasetConfig::Ring {
            modes: 8,
            radius: 2.0,
            std: 0.02,
        }
    }
}

impl DatasetConfig {
    pub fn build(&self) -> Result<Dataset> {
        Ok(match *self {
            DatasetConfig::Ring { modes, radius, std } => Dataset::Mixture(MixtureSpec::ring(modes, radius, std)?),
            DatasetConfig::Grid { side, spacing, std } => Dataset::Mixture(MixtureSpec::grid(side, spacing, std)?),
            DatasetConfig::Patterns {
                patterns,
                side,
                quadrants,
                flip_prob,
                pattern_seed,
            } => Dataset::Patterns(PatternDatasetSpec::generate(patterns, side, quadrants, flip_prob, pattern_seed)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBatch {
    pub samples: Tensor,
    pub labels: Vec<usize>,
    pub mode_count: usize,
}

const DATASET_MAGIC: &[u8; 4] = b"HGD1";

impl LabeledBatch {
    fn new(samples: Vec<f64>, n: usize, d: usize, labels: Vec<usize>, mode_count: usize) -> Self {
        // Tensors have no zero extents; an empty batch keeps one zero row
        // and an empty label list.
        let samples = if n == 0 {
            Tensor::zeros(&[1, d])
        } else {
            Tensor::matrix(n, d, samples).expect("row-major buffer")
        };
        Self {
            samples,
            labels,
            mode_count,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    /// Per-mode label counts.
    pub fn label_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.mode_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Writes the `HGD1` layout: magic, `u32` row count, `u32` dimension,
    /// `u32` mode count (all little-endian), row-major `f64` samples, then
    /// one `u32` label per row.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        let n = self.len();
        w.write_all(DATASET_MAGIC)?;
        for v in [n, self.dim(), self.mode_count] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for &v in &self.samples.data()[..n * self.dim()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &l in &self.labels {
            w.write_all(&(l as u32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("dataset magic is not HGD1".into()));
        }
        let mut word = [0u8; 4];
        let mut next_u32 = |r: &mut dyn Read| -> io::Result<usize> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word) as usize)
        };
        let n = next_u32(&mut r)?;
        let d = next_u32(&mut r)?;
        let modes = next_u32(&mut r)?;
        let mut buf = [0u8; 8];
        let mut samples = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            r.read_exact(&mut buf)?;
            samples.push(f64::from_le_bytes(buf));
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let l = next_u32(&mut r)?;
            if l >= modes {
                return Err(Error::Format(format!("label {l} outside {modes} modes")));
            }
            labels.push(l);
        }
        Ok(Self::new(samples, n, d, labels, modes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_ring_is_centered_gaussian() {
        let b = sample_ring(1, 0.0, 0.5, 2000, 1).unwrap();
        assert!(b.labels.iter().all(|&l| l == 0));
        let mean: f64 = b.samples.data().iter().sum::<f64>() / b.samples.len() as f64;
        assert!(mean.abs() < 4.0 * 0.5 / (4000f64).sqrt());
    }

    #[test]
    fn tiny_noise_stays_on_centers() {
        let spec = MixtureSpec::ring(8, 2.0, 1e-12).unwrap();
        let b = spec.sample(500, 3);
        for i in 0..b.len() {
            let p = b.samples.row(i);
            let c = &spec.centers[b.labels[i]];
            assert!((p[0] - c[0]).abs() < 1e-9 && (p[1] - c[1]).abs() < 1e-9);
            assert_eq!(spec.true_mode_of(p), b.labels[i]);
        }
    }

    #[test]
    fn ring_counts_follow_binomial() {
        let b = sample_ring(8, 2.0, 0.02, 10_000, 11).unwrap();
        let sd = (10_000.0f64 * 0.125 * 0.875).sqrt();
        for c in b.label_counts() {
            assert!((c as f64 - 1250.0).abs() <= 4.0 * sd, "{c}");
        }
    }

    #[test]
    fn grid_layout() {
        let one = MixtureSpec::grid(1, 3.0, 0.1).unwrap();
        assert_eq!(one.centers, vec![vec![0.0, 0.0]]);
        let two = MixtureSpec::grid(2, 2.0, 0.1).unwrap();
        assert_eq!(
            two.centers,
            vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]]
        );
        let b = sample_grid(5, 2.0, 0.05, 10_000, 2).unwrap();
        assert_eq!(b.label_counts().iter().filter(|&&c| c > 0).count(), 25);
    }

    #[test]
    fn true_mode_ties_pick_lowest() {
        let spec = MixtureSpec::ring(8, 2.0, 0.1).unwrap();
        assert_eq!(spec.true_mode_of(&spec.centers[5]), 5);
        // (0, 0) is exactly equidistant from centers 2 and 5.
        let pair = MixtureSpec::uniform(
            vec![vec![9.0, 9.0], vec![9.0, -9.0], vec![0.0, 1.0], vec![5.0, 5.0], vec![-9.0, 9.0], vec![0.0, -1.0]],
            0.1,
        )
        .unwrap();
        assert_eq!(pair.true_mode_of(&[0.0, 0.0]), 2);
    }

    #[test]
    fn invalid_mixtures_rejected() {
        assert!(MixtureSpec::uniform(vec![], 1.0).is_err());
        assert!(MixtureSpec::ring(3, 1.0, 0.0).is_err());
        assert!(MixtureSpec::new(vec![vec![0.0], vec![1.0]], 1.0, vec![0.3, 0.3]).is_err());
        assert!(MixtureSpec::uniform(vec![vec![0.0], vec![0.0]], 1.0).is_err());
    }

    #[test]
    fn composite_label_arithmetic() {
        let spec = PatternDatasetSpec::generate(10, 3, 3, 0.0, 0).unwrap();
        assert_eq!(spec.composite_label(&[3, 1, 4]), 314);
        assert_eq!(spec.label_digits(314), vec![3, 1, 4]);
        assert_eq!(spec.mode_count(), 1000);
    }

    #[test]
    fn single_quadrant_noise_free_samples_are_base_patterns() {
        let spec = PatternDatasetSpec::generate(5, 4, 1, 0.0, 9).unwrap();
        let b = spec.sample(200, 4);
        for i in 0..b.len() {
            let expected: Vec<f64> = spec.base_patterns[b.labels[i]].iter().map(|&v| f64::from(v)).collect();
            assert_eq!(b.samples.row(i), expected.as_slice());
            assert_eq!(spec.mode_of(b.samples.row(i)), b.labels[i]);
        }
    }

    #[test]
    fn three_quadrants_exact_and_blank_corner() {
        let spec = PatternDatasetSpec::generate(8, 4, 3, 0.0, 1).unwrap();
        assert_eq!(spec.dim(), 64);
        let b = spec.sample(300, 5);
        for i in 0..b.len() {
            let digits = spec.label_digits(b.labels[i]);
            assert_eq!(b.samples.row(i), spec.render(&digits).as_slice());
            let cs = spec.canvas_side();
            for r in 4..8 {
                for c in 4..8 {
                    assert_eq!(b.samples.row(i)[r * cs + c], 0.0);
                }
            }
        }
    }

    #[test]
    fn invalid_pattern_specs_rejected() {
        let p = vec![vec![0, 1, 1, 0], vec![1, 0, 0, 1]];
        assert!(PatternDatasetSpec::new(p.clone(), 2, 2, 0.0).is_err());
        assert!(PatternDatasetSpec::new(p.clone(), 2, 1, 0.5).is_err());
        assert!(PatternDatasetSpec::new(vec![p[0].clone(), p[0].clone()], 2, 1, 0.0).is_err());
        assert!(PatternDatasetSpec::new(vec![p[0].clone()], 2, 1, 0.0).is_err());
        assert!(PatternDatasetSpec::new(p, 2, 3, 0.05).is_ok());
    }

    #[test]
    fn hgd1_round_trip() {
        let b = sample_ring(4, 1.0, 0.1, 7, 0).unwrap();
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"HGD1");
        assert_eq!(buf.len(), 4 + 12 + 7 * 2 * 8 + 7 * 4);
        assert_eq!(LabeledBatch::read_from(buf.as_slice()).unwrap(), b);
        assert!(LabeledBatch::read_from(&b"XXXX"[..]).is_err());
    }
}
