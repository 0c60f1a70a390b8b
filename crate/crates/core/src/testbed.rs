//! Benchmark objectives with declared Lipschitz constants, synthetic
//! classification data, mini-batch streaming, and an IDX reader.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::branch_prune::Objective;
use crate::error::{invalid, Error, Result};
use crate::lipschitz::BoxDomain;
use crate::vecops;

/// A benchmark objective on a box with an analytic gradient.
#[derive(Clone)]
pub struct BenchmarkFn {
    pub name: &'static str,
    pub domain: BoxDomain,
    pub declared_l: f64,
    /// Known global minimizer and minimum, when available in closed form.
    pub known_min: Option<(Vec<f64>, f64)>,
    eval: fn(&[f64]) -> f64,
    grad: fn(&[f64]) -> Vec<f64>,
}

impl std::fmt::Debug for BenchmarkFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkFn")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("declared_l", &self.declared_l)
            .finish()
    }
}

impl BenchmarkFn {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    /// Minimum over an evenly spaced grid with `per_axis` points per axis.
    pub fn grid_min(&self, per_axis: usize) -> (Vec<f64>, f64) {
        let mut best = (Vec::new(), f64::INFINITY);
        for p in self.domain.grid(per_axis) {
            let v = self.evaluate(&p);
            if v < best.1 {
                best = (p.into_inner(), v);
            }
        }
        best
    }
}

impl Objective for BenchmarkFn {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.grad(x)
    }
}

fn abs1d(x: &[f64]) -> f64 {
    (x[0] - 0.3).abs()
}

fn abs1d_grad(x: &[f64]) -> Vec<f64> {
    // zero subgradient at the kink
    vec![if x[0] > 0.3 {
        1.0
    } else if x[0] < 0.3 {
        -1.0
    } else {
        0.0
    }]
}

// Four inverted-quadratic wells on [0, 1]; the deepest sits near x = 0.42.
const SHEKEL_A: [f64; 4] = [0.15, 0.42, 0.63, 0.86];
const SHEKEL_K: [f64; 4] = [300.0, 500.0, 400.0, 700.0];
const SHEKEL_C: [f64; 4] = [0.5, 0.3, 0.35, 0.4];
const SHEKEL_OFFSET: f64 = 3.445;

fn shekel1d(x: &[f64]) -> f64 {
    let s: f64 = (0..4)
        .map(|i| 1.0 / (SHEKEL_K[i] * (x[0] - SHEKEL_A[i]).powi(2) + SHEKEL_C[i]))
        .sum();
    SHEKEL_OFFSET - s
}

fn shekel1d_grad(x: &[f64]) -> Vec<f64> {
    let g: f64 = (0..4)
        .map(|i| {
            let dx = x[0] - SHEKEL_A[i];
            let q = SHEKEL_K[i] * dx * dx + SHEKEL_C[i];
            2.0 * SHEKEL_K[i] * dx / (q * q)
        })
        .sum();
    vec![g]
}

const GRAMACY_LEE_OFFSET: f64 = 0.875;

fn gramacy_lee(x: &[f64]) -> f64 {
    let x = x[0];
    (10.0 * std::f64::consts::PI * x).sin() / (2.0 * x) + (x - 1.0).powi(4) + GRAMACY_LEE_OFFSET
}

fn gramacy_lee_grad(x: &[f64]) -> Vec<f64> {
    let x = x[0];
    let w = 10.0 * std::f64::consts::PI;
    vec![w * (w * x).cos() / (2.0 * x) - (w * x).sin() / (2.0 * x * x) + 4.0 * (x - 1.0).powi(3)]
}

const QUAD_CENTER: [f64; 2] = [1.0, -0.5];

fn quad2d(x: &[f64]) -> f64 {
    vecops::dist_sq(x, &QUAD_CENTER) + 1.0
}

fn quad2d_grad(x: &[f64]) -> Vec<f64> {
    x.iter().zip(QUAD_CENTER).map(|(v, c)| 2.0 * (v - c)).collect()
}

fn rastrigin2d(x: &[f64]) -> f64 {
    use std::f64::consts::TAU;
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (TAU * v).cos()).sum::<f64>()
}

fn rastrigin2d_grad(x: &[f64]) -> Vec<f64> {
    use std::f64::consts::TAU;
    x.iter().map(|v| 2.0 * v + 10.0 * TAU * (TAU * v).sin()).collect()
}

/// All registered benchmarks.
///
/// Declared constants for the smooth functions are the maximum gradient norm
/// over a dense grid plus 10% headroom.
pub fn registry() -> Vec<BenchmarkFn> {
    let quad_far = [-5.0 - QUAD_CENTER[0], 5.0 - QUAD_CENTER[1]];
    vec![
        BenchmarkFn {
            name: "abs1d",
            domain: BoxDomain::cube(1, 0.0, 1.0).unwrap(),
            declared_l: 1.0,
            known_min: Some((vec![0.3], 0.0)),
            eval: abs1d,
            grad: abs1d_grad,
        },
        BenchmarkFn {
            name: "shekel1d",
            domain: BoxDomain::cube(1, 0.0, 1.0).unwrap(),
            // max |f'| ~ 88.47
            declared_l: 97.3,
            known_min: None,
            eval: shekel1d,
            grad: shekel1d_grad,
        },
        BenchmarkFn {
            name: "gramacy-lee",
            domain: BoxDomain::cube(1, 0.5, 2.5).unwrap(),
            // max |f'| ~ 31.92
            declared_l: 35.1,
            known_min: None,
            eval: gramacy_lee,
            grad: gramacy_lee_grad,
        },
        BenchmarkFn {
            name: "quad2d",
            domain: BoxDomain::cube(2, -5.0, 5.0).unwrap(),
            declared_l: 2.0 * vecops::norm(&quad_far),
            known_min: Some((QUAD_CENTER.to_vec(), 1.0)),
            eval: quad2d,
            grad: quad2d_grad,
        },
        BenchmarkFn {
            name: "rastrigin2d",
            domain: BoxDomain::cube(2, -5.12, 5.12).unwrap(),
            // max |grad| ~ 100.88
            declared_l: 111.0,
            known_min: Some((vec![0.0, 0.0], 0.0)),
            eval: rastrigin2d,
            grad: rastrigin2d_grad,
        },
    ]
}

pub fn lookup(name: &str) -> Result<BenchmarkFn> {
    registry().into_iter().find(|f| f.name == name).ok_or_else(|| {
        let names: Vec<_> = registry().iter().map(|f| f.name).collect();
        invalid(format!("unknown benchmark `{name}` (known: {})", names.join(", ")))
    })
}

/// Largest `|f(a) - f(b)| / |a - b|` over `pairs` random pairs in the domain.
///
/// Fails if that ratio exceeds the declared constant.
pub fn certify_l<R: Rng + ?Sized>(f: &BenchmarkFn, pairs: usize, rng: &mut R) -> Result<f64> {
    if pairs < 10_000 {
        return Err(invalid(format!("certification needs at least 10^4 pairs, got {pairs}")));
    }
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let a = f.domain.sample_uniform(rng);
        let b = f.domain.sample_uniform(rng);
        let d = vecops::dist(&a, &b);
        if d == 0.0 {
            continue;
        }
        let ratio = (f.evaluate(&a) - f.evaluate(&b)).abs() / d;
        if ratio > f.declared_l {
            return Err(Error::CertificationFailure {
                name: f.name.to_string(),
                ratio,
                declared: f.declared_l,
                a: a.into_inner(),
                b: b.into_inner(),
            });
        }
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Labeled examples, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub d_in: usize,
    pub classes: usize,
}

/// A mini-batch; same layout as [`Dataset`].
pub type MiniBatch = Dataset;

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, d_in: usize, classes: usize) -> Result<Self> {
        if d_in == 0 || classes == 0 {
            return Err(invalid("dataset needs d_in >= 1 and at least one class"));
        }
        if features.len() != labels.len() * d_in {
            return Err(invalid(format!(
                "{} feature values do not match {} labels x {d_in} features",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(invalid(format!("label {bad} outside [0, {classes})")));
        }
        Ok(Self { features, labels, d_in, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d_in..(i + 1) * self.d_in]
    }

    /// The examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> MiniBatch {
        let mut features = Vec::with_capacity(indices.len() * self.d_in);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset { features, labels, d_in: self.d_in, classes: self.classes }
    }
}

/// Gaussian clusters, one per class, centered on a circle of radius 3 in the
/// first two feature dimensions (on a line for `d_in == 1`).
pub fn make_blobs(classes: usize, per_class: usize, d_in: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || d_in == 0 {
        return Err(invalid("blob sizes must be positive"));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| invalid(format!("bad spread {spread}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(classes * per_class * d_in);
    let mut labels = Vec::with_capacity(classes * per_class);
    for k in 0..classes {
        let mut center = vec![0.0; d_in];
        if d_in == 1 {
            center[0] = 3.0 * (2.0 * k as f64 - (classes as f64 - 1.0));
        } else {
            let theta = std::f64::consts::TAU * k as f64 / classes as f64;
            center[0] = 3.0 * theta.cos();
            center[1] = 3.0 * theta.sin();
        }
        for _ in 0..per_class {
            features.extend(center.iter().map(|c| c + noise.sample(&mut rng)));
            labels.push(k);
        }
    }
    Dataset::new(features, labels, d_in, classes)
}

/// Deterministic shuffled mini-batch order: a fresh permutation per epoch.
#[derive(Debug, Clone)]
pub struct BatchStream<'a> {
    data: &'a Dataset,
    batch_size: usize,
    seed: u64,
}

pub fn batches(data: &Dataset, batch_size: usize, seed: u64) -> Result<BatchStream<'_>> {
    if batch_size == 0 || data.is_empty() {
        return Err(invalid("batch size and dataset must be nonempty"));
    }
    Ok(BatchStream { data, batch_size, seed })
}

impl<'a> BatchStream<'a> {
    pub fn batches_per_epoch(&self) -> usize {
        self.data.len().div_ceil(self.batch_size)
    }

    /// Example order for `epoch` (0-based).
    pub fn order(&self, epoch: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        idx.shuffle(&mut rng);
        idx
    }

    pub fn epoch(&self, epoch: usize) -> Vec<MiniBatch> {
        self.order(epoch).chunks(self.batch_size).map(|c| self.data.select(c)).collect()
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses an IDX image file: returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bad = |detail: &str| Error::Format { path: path.to_path_buf(), detail: detail.to_string() };
    if be_u32(bytes, 0) != Some(IDX_IMAGES_MAGIC) {
        return Err(bad("bad IDX image magic, expected 0x00000803"));
    }
    let n = be_u32(bytes, 4).ok_or_else(|| bad("truncated header"))? as usize;
    let rows = be_u32(bytes, 8).ok_or_else(|| bad("truncated header"))? as usize;
    let cols = be_u32(bytes, 12).ok_or_else(|| bad("truncated header"))? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(bad("pixel payload length does not match header"));
    }
    Ok((n, rows, cols, body.to_vec()))
}

/// Parses an IDX label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let bad = |detail: &str| Error::Format { path: path.to_path_buf(), detail: detail.to_string() };
    if be_u32(bytes, 0) != Some(IDX_LABELS_MAGIC) {
        return Err(bad("bad IDX label magic, expected 0x00000801"));
    }
    let n = be_u32(bytes, 4).ok_or_else(|| bad("truncated header"))? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(bad("label payload length does not match header"));
    }
    Ok(body.to_vec())
}

/// Loads an IDX image/label pair with pixels scaled to `[0, 1]`.
pub fn load_idx(images: &Path, labels: &Path, classes: usize) -> Result<Dataset> {
    let (n, rows, cols, pixels) = parse_idx_images(&std::fs::read(images)?, images)?;
    let labs = parse_idx_labels(&std::fs::read(labels)?, labels)?;
    if labs.len() != n {
        return Err(invalid(format!("{n} images but {} labels", labs.len())));
    }
    let features = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::new(features, labs.into_iter().map(usize::from).collect(), rows * cols, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_required_functions() {
        let names: Vec<_> = registry().iter().map(|f| f.name).collect();
        for n in ["abs1d", "shekel1d", "quad2d", "rastrigin2d"] {
            assert!(names.contains(&n), "{n} missing");
        }
        assert!(lookup("nope").is_err());
    }

    #[test]
    fn known_minima() {
        let abs = lookup("abs1d").unwrap();
        assert_eq!(abs.evaluate(&[0.3]), 0.0);
        let q = lookup("quad2d").unwrap();
        assert_eq!(q.evaluate(&[1.0, -0.5]), 1.0);
        assert!((q.declared_l - 2.0 * (36.0f64 + 30.25).sqrt()).abs() < 1e-12);
        let r = lookup("rastrigin2d").unwrap();
        assert_eq!(r.evaluate(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn certify_abs_and_quad() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = certify_l(&lookup("abs1d").unwrap(), 10_000, &mut rng).unwrap();
        assert!(r <= 1.0 + 1e-12);
        let q = lookup("quad2d").unwrap();
        assert!(certify_l(&q, 10_000, &mut rng).unwrap() <= q.declared_l);
        assert!(certify_l(&q, 10, &mut rng).is_err());
    }

    #[test]
    fn certify_reports_violation() {
        let mut f = lookup("quad2d").unwrap();
        f.declared_l = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(certify_l(&f, 10_000, &mut rng), Err(Error::CertificationFailure { .. })));
    }

    #[test]
    fn blob_batches_cover_each_epoch() {
        let data = make_blobs(2, 50, 3, 0.5, 11).unwrap();
        assert_eq!(data.len(), 100);
        let stream = batches(&data, 10, 5).unwrap();
        assert_eq!(stream.batches_per_epoch(), 10);
        let mut seen = stream.order(0);
        seen.sort_unstable();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
        assert_ne!(stream.order(0), stream.order(1));
        assert_eq!(stream.epoch(2), batches(&data, 10, 5).unwrap().epoch(2));
    }

    #[test]
    fn partial_last_batch() {
        let data = make_blobs(3, 7, 2, 0.5, 1).unwrap();
        let stream = batches(&data, 5, 0).unwrap();
        let sizes: Vec<_> = stream.epoch(0).iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![5, 5, 5, 5, 1]);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0; 4], vec![0, 2], 2, 2).is_err());
        assert!(Dataset::new(vec![0.0; 3], vec![0, 1], 2, 2).is_err());
        assert!(Dataset::new(vec![0.0; 4], vec![0, 1], 2, 2).is_ok());
    }

    #[test]
    fn idx_round_trip() {
        let mut img = Vec::new();
        img.extend_from_slice(&0x803u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&1u32.to_be_bytes());
        img.extend_from_slice(&[0, 255, 51, 102]);
        let mut lab = Vec::new();
        lab.extend_from_slice(&0x801u32.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&[1, 0]);
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        std::fs::write(&ip, &img).unwrap();
        std::fs::write(&lp, &lab).unwrap();
        let ds = load_idx(&ip, &lp, 2).unwrap();
        assert_eq!(ds.d_in, 2);
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.row(0), &[0.0, 1.0]);
        assert_eq!(ds.row(1), &[0.2, 0.4]);

        let mut wrong = img.clone();
        wrong[3] = 0x01;
        assert!(parse_idx_images(&wrong, &ip).is_err());
        assert!(parse_idx_labels(&img, &lp).is_err());
    }
}
