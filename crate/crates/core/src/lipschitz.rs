//! Lipschitz bound machinery: sample bookkeeping, the lower envelope, the
//! `rho * min f` lower estimator, and the removable-parameter-space (RPS) balls.
//!
//! A sample `x_j` with value `f_j` removes the open ball of radius
//! `(f_j - rho * min f) / L` around itself: by Lipschitz continuity no point in
//! it can score below the lower estimator. The union of those balls is the RPS.

use std::ops::Deref;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::vecops;

/// A point in parameter space. All coordinates are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("coordinate {i} is not finite ({})", coords[i])));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// Axis-aligned box domain `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("box bounds must be nonempty and of equal length"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("bad bounds on coordinate {i}: [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` on every coordinate.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        ParamVector(
            self.lower.iter().zip(&self.upper).map(|(l, u)| rng.random_range(*l..=*u)).collect(),
        )
    }

    /// Evenly spaced grid with `per_axis` points per coordinate, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<ParamVector> {
        assert!(per_axis >= 2, "grid needs at least two points per axis");
        let d = self.dim();
        let total = per_axis.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let coords = (0..d)
                .map(|k| {
                    let t = idx[k] as f64 / (per_axis - 1) as f64;
                    self.lower[k] + t * (self.upper[k] - self.lower[k])
                })
                .collect();
            out.push(ParamVector(coords));
            for k in 0..d {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    /// Largest `eta >= 0` with `origin - eta * direction` still inside the box.
    pub fn exit_distance(&self, origin: &[f64], direction: &[f64]) -> f64 {
        let mut eta = f64::INFINITY;
        for k in 0..self.dim() {
            // moving along -direction
            let step = -direction[k];
            if step > 0.0 {
                eta = eta.min((self.upper[k] - origin[k]) / step);
            } else if step < 0.0 {
                eta = eta.min((self.lower[k] - origin[k]) / step);
            }
        }
        eta.max(0.0)
    }
}

/// One evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: ParamVector,
    pub value: f64,
    pub gradient: Option<ParamVector>,
    /// 1-based position in the owning history.
    pub index: usize,
}

/// Ordered record of evaluated samples with the running minimum.
///
/// Append-only. The minimum index is the earliest sample attaining the minimum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleHistory {
    samples: Vec<Sample>,
    min_value: f64,
    min_index: usize,
}

impl SampleHistory {
    pub fn new() -> Self {
        Self { samples: Vec::new(), min_value: f64::INFINITY, min_index: 0 }
    }

    /// Appends a sample and returns its 1-based index.
    ///
    /// Values must be finite and nonnegative; anything else is reported as an
    /// assumption violation since the bounds are meaningless without it.
    pub fn push(
        &mut self,
        point: ParamVector,
        value: f64,
        gradient: Option<ParamVector>,
    ) -> Result<usize> {
        if !value.is_finite() {
            return Err(Error::AssumptionViolation {
                assumption: "F2",
                detail: format!("objective returned non-finite value {value}"),
            });
        }
        if value < 0.0 {
            return Err(Error::AssumptionViolation {
                assumption: "F1",
                detail: format!("objective returned negative value {value}"),
            });
        }
        if let Some(first) = self.samples.first() {
            if first.point.dim() != point.dim() {
                return Err(invalid(format!(
                    "sample dimension {} does not match history dimension {}",
                    point.dim(),
                    first.point.dim()
                )));
            }
        }
        if let Some(g) = &gradient {
            if g.dim() != point.dim() {
                return Err(invalid("gradient dimension does not match point"));
            }
        }
        let index = self.samples.len() + 1;
        if value < self.min_value {
            self.min_value = value;
            self.min_index = index;
        }
        self.samples.push(Sample { point, value, gradient, index });
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Sample by 1-based index.
    pub fn get(&self, index: usize) -> Option<&Sample> {
        index.checked_sub(1).and_then(|i| self.samples.get(i))
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.point.dim())
    }

    /// Running minimum, `+inf` when empty.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// 1-based index of the earliest minimizing sample, 0 when empty.
    pub fn min_index(&self) -> usize {
        self.min_index
    }

    pub fn best(&self) -> Option<&Sample> {
        self.get(self.min_index)
    }

    /// The first `t` samples as a standalone history, for replaying checkpoints.
    pub fn prefix(&self, t: usize) -> SampleHistory {
        let mut h = SampleHistory::new();
        for s in self.samples.iter().take(t) {
            h.samples.push(s.clone());
            if s.value < h.min_value {
                h.min_value = s.value;
                h.min_index = s.index;
            }
        }
        h
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::InvalidState("sample history is empty".into()))
        } else {
            Ok(())
        }
    }

    fn require_dim(&self, x: &[f64]) -> Result<()> {
        self.require_nonempty()?;
        let d = self.samples[0].point.dim();
        if x.len() != d {
            return Err(invalid(format!("point has dimension {}, history has {d}", x.len())));
        }
        Ok(())
    }
}

/// Lipschitz constant, lower-bound scale and target precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConfig {
    pub lipschitz: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl LipschitzConfig {
    pub fn new(lipschitz: f64, rho: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self { lipschitz, rho, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(invalid(format!("Lipschitz constant must be positive, got {}", self.lipschitz)));
        }
        check_rho(self.rho)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Self { rho, ..self }
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(invalid(format!("rho must lie in [0, 1), got {rho}")))
    }
}

/// Open ball removed from the search space by one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpsBall {
    /// 1-based index into the history.
    pub center_index: usize,
    pub radius: f64,
}

/// `max_i { f_i - L * |x_i - x| }`.
pub fn lower_envelope(history: &SampleHistory, x: &[f64], lipschitz: f64) -> Result<f64> {
    history.require_dim(x)?;
    Ok(history
        .samples
        .iter()
        .map(|s| s.value - lipschitz * vecops::dist(&s.point, x))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Tractable upper bound on the global minimum: the best value seen.
pub fn upper_bound(history: &SampleHistory) -> Result<f64> {
    history.require_nonempty()?;
    Ok(history.min_value)
}

/// Tractable lower estimator `rho * min f`.
pub fn lower_estimator(history: &SampleHistory, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    history.require_nonempty()?;
    Ok(rho * history.min_value)
}

/// Radius `(f_j - rho * min f) / L` of the ball around `sample`.
pub fn ball_radius(sample: &Sample, history: &SampleHistory, cfg: &LipschitzConfig) -> f64 {
    radius_of(sample.value, history.min_value, cfg)
}

#[inline]
pub(crate) fn radius_of(value: f64, min_value: f64, cfg: &LipschitzConfig) -> f64 {
    (value - cfg.rho * min_value) / cfg.lipschitz
}

/// All RPS balls of the history under `cfg`.
pub fn balls(history: &SampleHistory, cfg: &LipschitzConfig) -> Vec<RpsBall> {
    history
        .samples
        .iter()
        .map(|s| RpsBall { center_index: s.index, radius: ball_radius(s, history, cfg) })
        .collect()
}

/// Whether `x` lies strictly inside the removable parameter space.
///
/// Evaluated as "some sample has `f_j - L * |x_j - x| > rho * min f`", which is
/// the same floating-point comparison as `lower_envelope > lower_estimator`.
pub fn in_rps(history: &SampleHistory, x: &[f64], cfg: &LipschitzConfig) -> Result<bool> {
    history.require_dim(x)?;
    Ok(in_rps_unchecked(history, x, cfg))
}

pub(crate) fn in_rps_unchecked(history: &SampleHistory, x: &[f64], cfg: &LipschitzConfig) -> bool {
    let floor = cfg.rho * history.min_value;
    history
        .samples
        .iter()
        .any(|s| s.value - cfg.lipschitz * vecops::dist(&s.point, x) > floor)
}

/// Fraction of `probes` inside the RPS; 1.0 approximates full coverage.
pub fn coverage_fraction(
    history: &SampleHistory,
    cfg: &LipschitzConfig,
    probes: &[ParamVector],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(invalid("coverage needs at least one probe point"));
    }
    let mut covered = 0usize;
    for p in probes {
        if in_rps(history, p, cfg)? {
            covered += 1;
        }
    }
    Ok(covered as f64 / probes.len() as f64)
}
