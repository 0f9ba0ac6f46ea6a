//! Straight-line reimplementations used as oracles. Nothing here calls into
//! the crate's metric code.

#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

pub fn kl(p: &[u64], q: &[u64], eps: f64) -> f64 {
    let c = p.len() as f64;
    let pt: f64 = p.iter().map(|&v| v as f64).sum::<f64>() + c * eps;
    let qt: f64 = q.iter().map(|&v| v as f64).sum::<f64>() + c * eps;
    let mut total = 0.0;
    for j in 0..p.len() {
        let a = (p[j] as f64 + eps) / pt;
        let b = (q[j] as f64 + eps) / qt;
        if a > 0.0 {
            total += a * (a.ln() - b.ln());
        }
    }
    total
}

pub fn pearson(o: &[u64], e: &[u64]) -> f64 {
    let ot: f64 = o.iter().map(|&v| v as f64).sum();
    let et: f64 = e.iter().map(|&v| v as f64).sum();
    let mut total = 0.0;
    for j in 0..o.len() {
        let expected = e[j] as f64 * ot / et;
        let d = o[j] as f64 - expected;
        total += d * d / expected.max(1e-6);
    }
    total
}

pub fn mode_score(probs: &Mat) -> f64 {
    let n = probs.len() as f64;
    let c = probs[0].len();
    let marginal: Vec<f64> = (0..c).map(|j| probs.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut acc = 0.0;
    for row in probs {
        for j in 0..c {
            if row[j] > 0.0 {
                acc += row[j] * (row[j].ln() - marginal[j].ln());
            }
        }
    }
    (acc / n).exp()
}

pub fn mean_cov(x: &Mat) -> (Vec<f64>, Mat) {
    let n = x.len();
    let d = x[0].len();
    let mut mu = vec![0.0; d];
    for row in x {
        for j in 0..d {
            mu[j] += row[j];
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for row in x {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (row[a] - mu[a]) * (row[b] - mu[b]);
            }
        }
    }
    for r in &mut cov {
        for v in r.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    (mu, cov)
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            for j in 0..m {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Principal square root by Denman-Beavers iteration.
pub fn sqrtm(a: &Mat) -> Mat {
    let n = a.len();
    let mut y = a.clone();
    let mut z: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let yi = inverse(&y);
        let zi = inverse(&z);
        let ny: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (y[i][j] + zi[i][j])).collect()).collect();
        let nz: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (z[i][j] + yi[i][j])).collect()).collect();
        let delta: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (ny[i][j] - y[i][j]).abs()).sum();
        y = ny;
        z = nz;
        if delta < 1e-15 {
            break;
        }
    }
    y
}

pub fn trace(a: &Mat) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn frechet(real: &Mat, fake: &Mat) -> f64 {
    let (m1, s1) = mean_cov(real);
    let (m2, s2) = mean_cov(fake);
    let mean_term: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b) * (a - b)).sum();
    let root = sqrtm(&matmul(&s1, &s2));
    mean_term + trace(&s1) + trace(&s2) - 2.0 * trace(&root)
}

/// Small deterministic generator so fixtures do not depend on the crate.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        (self.next_f64() * n as f64) as u64
    }

    pub fn gaussian(&mut self) -> f64 {
        let u = self.next_f64().max(1e-300);
        let v = self.next_f64();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

pub fn histogram_fixtures() -> Vec<(Vec<u64>, Vec<u64>)> {
    let mut r = Lcg(17);
    let mut out = vec![(vec![1000, 0], vec![500, 500]), (vec![75, 25], vec![50, 50])];
    for c in [5usize, 8, 32] {
        let p = (0..c).map(|j| if j % 3 == 0 { 0 } else { r.below(400) }).collect();
        let q = (0..c).map(|_| 1 + r.below(300)).collect();
        out.push((p, q));
    }
    out
}

pub fn probability_fixtures() -> Vec<Mat> {
    let mut r = Lcg(23);
    let mut out = Vec::new();
    for (n, c, sharp) in [(100, 4, 1.0), (150, 8, 6.0), (120, 3, 0.1), (200, 10, 3.0), (100, 2, 12.0)] {
        let rows = (0..n)
            .map(|_| {
                let logits: Vec<f64> = (0..c).map(|_| sharp * r.gaussian()).collect();
                let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            })
            .collect();
        out.push(rows);
    }
    out
}

pub fn feature_fixtures() -> Vec<(Mat, Mat)> {
    let mut r = Lcg(31);
    let mut out = Vec::new();
    for (n, d, shift, scale) in [(40, 1, 1.0, 1.0), (60, 3, 0.5, 2.0), (80, 5, 0.0, 0.5), (50, 4, 2.0, 1.5), (120, 8, 0.3, 1.1)] {
        let a: Mat = (0..n).map(|_| (0..d).map(|_| r.gaussian()).collect()).collect();
        let b: Mat = (0..n + 7)
            .map(|_| {
                let base: Vec<f64> = (0..d).map(|_| r.gaussian()).collect();
                // Correlate coordinates so the covariance is not diagonal.
                (0..d).map(|j| shift + scale * base[j] + 0.4 * base[(j + 1) % d]).collect()
            })
            .collect();
        out.push((a, b));
    }
    out
}
