//! Exact branch-and-prune global optimization.
//!
//! Each new sample is taken by walking from the latest sample along its
//! negative normalized gradient until the walk leaves the removable parameter
//! space (the union of Lipschitz balls around previous samples). When the ray
//! is blocked inside the box, a handful of random directions are tried. When
//! every attempt is blocked the space is treated as covered at the current
//! `rho`; `rho` is then raised, which shrinks every ball and reopens space.

use std::time::Instant;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::harness::trace::{RunTrace, TraceRow};
use crate::lipschitz::{
    self, check_rho, radius_of, BoxDomain, LipschitzConfig, ParamVector, SampleHistory,
};
use crate::vecops;

/// An objective with an analytic gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// How `rho` grows between outer phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoSchedule {
    /// `rho <- (1 + rho) / 2`
    HalvingGap,
    /// `rho <- 1 - 1/(m + 1)` after phase `m`.
    #[default]
    Harmonic,
}

impl RhoSchedule {
    /// Next `rho` after finishing phase `phase` (1-based) at `rho`.
    pub fn next(self, rho: f64, phase: usize) -> f64 {
        let proposed = match self {
            RhoSchedule::HalvingGap => 0.5 * (1.0 + rho),
            RhoSchedule::Harmonic => 1.0 - 1.0 / (phase as f64 + 1.0),
        };
        proposed.max(rho)
    }

    pub fn name(self) -> &'static str {
        match self {
            RhoSchedule::HalvingGap => "halving-gap",
            RhoSchedule::Harmonic => "harmonic",
        }
    }
}

impl std::str::FromStr for RhoSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halving-gap" => Ok(Self::HalvingGap),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(invalid(format!("unknown rho schedule `{other}` (halving-gap | harmonic)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPruneConfig {
    /// `rho` here is the starting value, normally 0.
    pub lipschitz: LipschitzConfig,
    /// Distortion/step trade-off of the sampling problem. With the ray-exit
    /// sampler the minimizer stays on the gradient ray, so this is recorded but
    /// does not change the samples.
    pub gamma: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub rho_schedule: RhoSchedule,
    pub fallback_attempts: usize,
    /// Relative distance a new sample is pushed past a ball surface.
    pub boundary_slack: f64,
}

impl BranchPruneConfig {
    pub fn new(lipschitz: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self {
            lipschitz: LipschitzConfig::new(lipschitz, 0.0, epsilon)?,
            ..Self::default()
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.lipschitz.validate()?;
        if !(self.gamma >= 0.0) {
            return Err(invalid(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if self.max_inner_iters == 0 || self.max_outer_iters == 0 || self.fallback_attempts == 0 {
            return Err(invalid("iteration caps and fallback attempts must be at least 1"));
        }
        if !(self.boundary_slack > 0.0 && self.boundary_slack <= 1e-3) {
            return Err(invalid(format!(
                "boundary slack must lie in (0, 1e-3], got {}",
                self.boundary_slack
            )));
        }
        Ok(())
    }
}

impl Default for BranchPruneConfig {
    fn default() -> Self {
        Self {
            lipschitz: LipschitzConfig { lipschitz: 1.0, rho: 0.0, epsilon: 0.01 },
            gamma: 0.0,
            max_inner_iters: 20_000,
            max_outer_iters: 200,
            rho_schedule: RhoSchedule::Harmonic,
            fallback_attempts: 32,
            boundary_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EpsilonCriterion,
    BudgetExhausted,
    SpaceExhausted,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::EpsilonCriterion => "epsilon-criterion",
            Termination::BudgetExhausted => "budget-exhausted",
            Termination::SpaceExhausted => "space-exhausted",
        }
    }
}

/// How an inner (fixed-`rho`) loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseEnd {
    /// No sample outside the RPS could be found.
    Covered,
    InnerBudget,
    Epsilon,
}

/// One fixed-`rho` phase of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub phase: usize,
    pub rho: f64,
    /// 1-based history indices of samples accepted during this phase
    /// (`first > last` when the phase accepted nothing).
    pub first_index: usize,
    pub last_index: usize,
    /// Running minimum when the phase ended.
    pub min_at_end: f64,
    pub ended_by: PhaseEnd,
}

impl PhaseRecord {
    pub fn sample_count(&self) -> usize {
        (self.last_index + 1).saturating_sub(self.first_index)
    }
}

#[derive(Debug, Clone)]
pub struct GlobalResult {
    pub minimizer: ParamVector,
    pub minimum: f64,
    pub history: SampleHistory,
    pub rho_final: f64,
    pub terminated_by: Termination,
    pub phases: Vec<PhaseRecord>,
    pub trace: RunTrace,
}

/// Where a proposed sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Gradient,
    /// Random direction, used for zero gradients and blocked gradient rays.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub point: ParamVector,
    /// Distance travelled from the latest sample.
    pub eta: f64,
    pub direction: Direction,
}

/// Smallest `eta >= 0` such that `origin - eta * direction` is outside the RPS
/// and inside `domain`, or `None` if the whole in-box ray segment is removed.
///
/// Each ball contributes the open interval of `eta` solving
/// `eta^2 - 2 eta <origin - x_j, u> + |origin - x_j|^2 - r_j^2 < 0`. The
/// intervals are swept in order of their left end; each time the candidate is
/// covered it jumps to the covering interval's right end times `1 + slack`.
pub fn ray_exit(
    history: &SampleHistory,
    origin: &[f64],
    direction: &[f64],
    cfg: &LipschitzConfig,
    domain: &BoxDomain,
    slack: f64,
) -> Result<Option<f64>> {
    let d = domain.dim();
    if origin.len() != d || direction.len() != d {
        return Err(invalid("ray origin/direction dimension does not match the domain"));
    }
    if history.dim().is_some_and(|hd| hd != d) {
        return Err(invalid("history dimension does not match the domain"));
    }
    let n = vecops::norm(direction);
    if (n - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("ray direction must have unit norm, got {n}")));
    }
    Ok(ray_exit_unchecked(history, origin, direction, cfg, domain, slack))
}

fn ray_exit_unchecked(
    history: &SampleHistory,
    origin: &[f64],
    direction: &[f64],
    cfg: &LipschitzConfig,
    domain: &BoxDomain,
    slack: f64,
) -> Option<f64> {
    let eta_max = domain.exit_distance(origin, direction);
    let min_value = history.min_value();

    let mut intervals: Vec<(f64, f64)> = history
        .samples()
        .iter()
        .filter_map(|s| {
            let r = radius_of(s.value, min_value, cfg);
            if r <= 0.0 {
                return None;
            }
            let w: Vec<f64> = origin.iter().zip(s.point.iter()).map(|(o, c)| o - c).collect();
            let b = vecops::dot(&w, direction);
            let c = vecops::dot(&w, &w) - r * r;
            let disc = b * b - c;
            if disc <= 0.0 {
                return None;
            }
            let root = disc.sqrt();
            let hi = b + root;
            if hi <= 0.0 {
                return None;
            }
            Some((b - root, hi))
        })
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut eta = 0.0f64;
    for &(lo, hi) in &intervals {
        if lo >= eta {
            break;
        }
        if hi > eta {
            eta = hi * (1.0 + slack);
            if eta > eta_max {
                return None;
            }
        }
    }

    // Rounding in the interval roots can leave the point a hair inside a ball.
    let mut bump = slack;
    for _ in 0..32 {
        if eta > eta_max {
            return None;
        }
        let mut p: Vec<f64> = origin.iter().zip(direction).map(|(o, u)| o - eta * u).collect();
        domain.clamp(&mut p);
        if !lipschitz::in_rps_unchecked(history, &p, cfg) {
            return Some(eta);
        }
        let covering = history
            .samples()
            .iter()
            .filter(|s| s.value - cfg.lipschitz * vecops::dist(&s.point, &p) > cfg.rho * min_value)
            .map(|s| {
                let r = radius_of(s.value, min_value, cfg);
                let w: Vec<f64> = origin.iter().zip(s.point.iter()).map(|(o, c)| o - c).collect();
                let b = vecops::dot(&w, direction);
                let c = vecops::dot(&w, &w) - r * r;
                b + (b * b - c).max(0.0).sqrt()
            })
            .fold(eta, f64::max);
        bump *= 2.0;
        eta = covering.max(eta) * (1.0 + bump) + f64::EPSILON;
    }
    None
}

fn point_along(origin: &[f64], direction: &[f64], eta: f64, domain: &BoxDomain) -> Result<ParamVector> {
    let mut p: Vec<f64> = origin.iter().zip(direction).map(|(o, u)| o - eta * u).collect();
    domain.clamp(&mut p);
    ParamVector::new(p)
}

/// Proposes the next sample from the latest one.
///
/// Walks along `-grad / |grad|` to the first point outside the RPS. A zero
/// gradient is replaced by a random unit direction. If the gradient ray is
/// blocked, up to `fallback_attempts` random unit directions are tried.
/// `None` means no free point was found and `rho` should be raised.
pub fn next_sample<R: Rng + ?Sized>(
    history: &SampleHistory,
    grad_at_last: &[f64],
    cfg: &BranchPruneConfig,
    domain: &BoxDomain,
    rng: &mut R,
) -> Result<Option<Proposal>> {
    let last = history.last().ok_or_else(|| Error::InvalidState("sample history is empty".into()))?;
    let d = domain.dim();
    if last.point.dim() != d || grad_at_last.len() != d {
        return Err(invalid("gradient/history dimension does not match the domain"));
    }
    let origin = last.point.as_slice();
    let lip = &cfg.lipschitz;

    let (first_dir, first_kind) = match vecops::unit(grad_at_last) {
        Some(u) => (u, Direction::Gradient),
        None => (vecops::random_unit(d, rng), Direction::Random),
    };
    if let Some(eta) = ray_exit_unchecked(history, origin, &first_dir, lip, domain, cfg.boundary_slack) {
        let point = point_along(origin, &first_dir, eta, domain)?;
        return Ok(Some(Proposal { point, eta, direction: first_kind }));
    }
    for _ in 0..cfg.fallback_attempts {
        let u = vecops::random_unit(d, rng);
        if let Some(eta) = ray_exit_unchecked(history, origin, &u, lip, domain, cfg.boundary_slack) {
            let point = point_along(origin, &u, eta, domain)?;
            return Ok(Some(Proposal { point, eta, direction: Direction::Random }));
        }
    }
    Ok(None)
}

fn evaluate<O: Objective + ?Sized>(oracle: &O, x: &ParamVector) -> Result<(f64, ParamVector)> {
    let value = oracle.value(x);
    let grad = oracle.gradient(x);
    if grad.len() != x.dim() {
        return Err(invalid("oracle gradient has the wrong dimension"));
    }
    let grad = ParamVector::new(grad).map_err(|_| Error::AssumptionViolation {
        assumption: "F2",
        detail: format!("non-finite gradient at {:?}", x.as_slice()),
    })?;
    Ok((value, grad))
}

/// Runs branch-and-prune global minimization of `oracle` over `domain`.
///
/// Terminates with [`Termination::EpsilonCriterion`] as soon as `min f <= eps`,
/// or when a phase ends with the space covered and `min f <= eps / (1 - rho)`.
pub fn optimize_global<O: Objective + ?Sized, R: Rng + ?Sized>(
    oracle: &O,
    domain: &BoxDomain,
    cfg: &BranchPruneConfig,
    rng: &mut R,
) -> Result<GlobalResult> {
    cfg.validate()?;
    if oracle.dim() != domain.dim() {
        return Err(invalid(format!(
            "objective dimension {} does not match domain dimension {}",
            oracle.dim(),
            domain.dim()
        )));
    }
    let started = Instant::now();
    let eps = cfg.lipschitz.epsilon;
    let mut rho = cfg.lipschitz.rho;
    check_rho(rho)?;
    let mut phase = 1usize;

    let mut history = SampleHistory::new();
    let mut trace = RunTrace::new(None);
    let mut phases = Vec::new();

    let x1 = domain.sample_uniform(rng);
    let (f1, g1) = evaluate(oracle, &x1)?;
    history.push(x1, f1, Some(g1))?;
    trace.push(TraceRow {
        iter: 1,
        phase,
        rho,
        f: f1,
        running_min: f1,
        eta: 0.0,
        lhs: f64::NEG_INFINITY,
        rhs: rho * f1,
        satisfied: true,
        wall_ms: elapsed_ms(started),
    });

    let finish = |history: SampleHistory, rho: f64, how: Termination, phases, trace| {
        let best = history.best().expect("history is nonempty");
        GlobalResult {
            minimizer: best.point.clone(),
            minimum: best.value,
            rho_final: rho,
            terminated_by: how,
            phases,
            trace,
            history,
        }
    };

    if history.min_value() <= eps {
        return Ok(finish(history, rho, Termination::EpsilonCriterion, phases, trace));
    }

    for _outer in 0..cfg.max_outer_iters {
        let lip = cfg.lipschitz.with_rho(rho);
        let step_cfg = BranchPruneConfig { lipschitz: lip, ..cfg.clone() };
        let first_index = history.len() + 1;
        let mut ended_by = PhaseEnd::InnerBudget;

        for _inner in 0..cfg.max_inner_iters {
            let grad = history.last().and_then(|s| s.gradient.clone()).expect("samples carry gradients");
            let Some(prop) = next_sample(&history, &grad, &step_cfg, domain, rng)? else {
                ended_by = PhaseEnd::Covered;
                break;
            };
            let lhs = lipschitz::lower_envelope(&history, &prop.point, lip.lipschitz)?;
            let rhs = rho * history.min_value();
            let (f, g) = evaluate(oracle, &prop.point)?;
            history.push(prop.point, f, Some(g))?;
            trace.push(TraceRow {
                iter: history.len(),
                phase,
                rho,
                f,
                running_min: history.min_value(),
                eta: prop.eta,
                lhs,
                rhs,
                satisfied: lhs <= rhs,
                wall_ms: elapsed_ms(started),
            });
            if history.min_value() <= eps {
                ended_by = PhaseEnd::Epsilon;
                break;
            }
        }

        phases.push(PhaseRecord {
            phase,
            rho,
            first_index,
            last_index: history.len(),
            min_at_end: history.min_value(),
            ended_by,
        });
        match ended_by {
            PhaseEnd::Epsilon => {
                return Ok(finish(history, rho, Termination::EpsilonCriterion, phases, trace));
            }
            PhaseEnd::Covered if history.min_value() <= eps / (1.0 - rho) => {
                return Ok(finish(history, rho, Termination::EpsilonCriterion, phases, trace));
            }
            _ => {}
        }

        let next = cfg.rho_schedule.next(rho, phase);
        if !(next > rho && next < 1.0) {
            return Ok(finish(history, rho, Termination::SpaceExhausted, phases, trace));
        }
        rho = next;
        phase += 1;
    }
    Ok(finish(history, rho, Termination::BudgetExhausted, phases, trace))
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Volume of the unit ball in `d` dimensions, `pi^(d/2) / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2 pi / d
    let even = d.is_multiple_of(2);
    let mut v = if even { 1.0 } else { 2.0 };
    let mut k = if even { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Upper bound on the number of samples a fixed-`rho` run can take.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBound {
    pub bound: f64,
    /// Set when `f_min <= 0`, where the bound degenerates to `+inf`.
    pub undefined: bool,
}

/// `[2L / ((1 - rho) f_min)]^d * volume / C_d` with `C_d` the unit-ball volume.
///
/// A test oracle for the packing argument, never used as a runtime budget.
pub fn thm2_sample_bound(lipschitz: f64, rho: f64, f_min: f64, d: usize, box_volume: f64) -> Result<SampleBound> {
    check_rho(rho)?;
    if !(lipschitz > 0.0) || d == 0 || !(box_volume > 0.0) {
        return Err(invalid("bound needs L > 0, d >= 1 and a positive volume"));
    }
    if !(f_min > 0.0) {
        return Ok(SampleBound { bound: f64::INFINITY, undefined: true });
    }
    let base = 2.0 * lipschitz / ((1.0 - rho) * f_min);
    Ok(SampleBound { bound: base.powi(d as i32) * box_volume / unit_ball_volume(d), undefined: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    struct Abs03;
    impl Objective for Abs03 {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            (x[0] - 0.3).abs()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![if x[0] >= 0.3 { 1.0 } else { -1.0 }]
        }
    }

    struct Constant(f64);
    impl Objective for Constant {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _: &[f64]) -> f64 {
            self.0
        }
        fn gradient(&self, _: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
    }

    struct Negative;
    impl Objective for Negative {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0] - 2.0
        }
        fn gradient(&self, _: &[f64]) -> Vec<f64> {
            vec![1.0]
        }
    }

    #[test]
    fn ray_exit_without_balls_is_zero() {
        let dom = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let mut h = SampleHistory::new();
        // zero radius: value equals rho * min with rho = 0 and value 0
        h.push(pv(&[0.0, 0.0]), 0.0, None).unwrap();
        let cfg = LipschitzConfig::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(ray_exit(&h, &[0.5, 0.5], &[1.0, 0.0], &cfg, &dom, 1e-9).unwrap(), Some(0.0));
    }

    #[test]
    fn ray_exit_single_ball_at_origin() {
        let dom = BoxDomain::cube(2, -10.0, 10.0).unwrap();
        let mut h = SampleHistory::new();
        h.push(pv(&[1.0, 2.0]), 3.0, None).unwrap();
        let cfg = LipschitzConfig::new(2.0, 0.0, 0.0).unwrap();
        let slack = 1e-9;
        let r = 1.5;
        for dir in [[1.0, 0.0], [0.6, -0.8], [-1.0, 0.0]] {
            let eta = ray_exit(&h, &[1.0, 2.0], &dir, &cfg, &dom, slack).unwrap().unwrap();
            assert!((eta - r * (1.0 + slack)).abs() < 1e-14, "{eta}");
        }
    }

    #[test]
    fn ray_exit_rejects_non_unit_direction() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let mut h = SampleHistory::new();
        h.push(pv(&[0.5]), 1.0, None).unwrap();
        let cfg = LipschitzConfig::new(1.0, 0.0, 0.0).unwrap();
        assert!(matches!(ray_exit(&h, &[0.5], &[2.0], &cfg, &dom, 1e-9), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ray_exit_blocked_by_box() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let mut h = SampleHistory::new();
        h.push(pv(&[0.5]), 1.0, None).unwrap();
        let cfg = LipschitzConfig::new(1.0, 0.0, 0.0).unwrap();
        // ball radius 1 covers the whole unit interval in both directions
        assert_eq!(ray_exit(&h, &[0.5], &[1.0], &cfg, &dom, 1e-9).unwrap(), None);
        assert_eq!(ray_exit(&h, &[0.5], &[-1.0], &cfg, &dom, 1e-9).unwrap(), None);
    }

    #[test]
    fn next_sample_single_ball_exit() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let mut h = SampleHistory::new();
        h.push(pv(&[0.8]), 0.5, Some(pv(&[1.0]))).unwrap();
        let cfg = BranchPruneConfig::new(10.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = next_sample(&h, &[3.0], &cfg, &dom, &mut rng).unwrap().unwrap();
        let expected = 0.8 - 0.05 * (1.0 + cfg.boundary_slack);
        assert!((p.point[0] - expected).abs() < 1e-15);
        assert_eq!(p.direction, Direction::Gradient);
        assert!(!lipschitz::in_rps(&h, &p.point, &cfg.lipschitz).unwrap());
    }

    #[test]
    fn next_sample_trapped() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let mut h = SampleHistory::new();
        h.push(pv(&[0.2]), 0.5, None).unwrap();
        h.push(pv(&[0.7]), 0.5, None).unwrap();
        let cfg = BranchPruneConfig::new(1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(next_sample(&h, &[1.0], &cfg, &dom, &mut rng).unwrap(), None);
    }

    #[test]
    fn zero_gradient_uses_random_direction() {
        let dom = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        let mut h = SampleHistory::new();
        h.push(pv(&[0.0, 0.0]), 1.0, None).unwrap();
        let cfg = BranchPruneConfig::new(1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = next_sample(&h, &[0.0, 0.0], &cfg, &dom, &mut rng).unwrap().unwrap();
        assert_eq!(p.direction, Direction::Random);
        assert!((vecops::norm(&p.point) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_function_terminates_at_once() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let cfg = BranchPruneConfig::new(1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let res = optimize_global(&Constant(0.4), &dom, &cfg, &mut rng).unwrap();
        assert_eq!(res.minimum, 0.4);
        assert_eq!(res.terminated_by, Termination::EpsilonCriterion);
        assert_eq!(res.rho_final, 0.0);
    }

    #[test]
    fn constant_function_needs_rho_escalation() {
        // eps < c: the first phase covers the interval, then eps/(1-rho) >= c
        // holds once rho >= 1 - eps/c = 0.5 under the harmonic schedule.
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let cfg = BranchPruneConfig::new(4.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let res = optimize_global(&Constant(1.0), &dom, &cfg, &mut rng).unwrap();
        assert_eq!(res.terminated_by, Termination::EpsilonCriterion);
        assert_eq!(res.rho_final, 0.5);
        assert_eq!(res.minimum, 1.0);
    }

    #[test]
    fn abs_function_finds_minimum() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let cfg = BranchPruneConfig::new(1.0, 0.01).unwrap();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let res = optimize_global(&Abs03, &dom, &cfg, &mut rng).unwrap();
            assert!(res.minimum <= 0.01);
            assert!((res.minimizer[0] - 0.3).abs() <= 0.01);
            assert_eq!(res.minimum, res.history.min_value());
            assert_eq!(&res.minimizer, &res.history.best().unwrap().point);
        }
    }

    #[test]
    fn negative_objective_is_rejected() {
        let dom = BoxDomain::cube(1, 0.0, 1.0).unwrap();
        let cfg = BranchPruneConfig::new(1.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = optimize_global(&Negative, &dom, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation { assumption: "F1", .. }));
    }

    #[test]
    fn sample_bound_examples() {
        let b = thm2_sample_bound(1.0, 0.0, 1.0, 1, 1.0).unwrap();
        assert!((b.bound - 1.0).abs() < 1e-15);
        let b = thm2_sample_bound(10.0, 0.5, 2.0, 2, 4.0).unwrap();
        assert!((b.bound - 1600.0 / std::f64::consts::PI).abs() < 1e-9);
        let b = thm2_sample_bound(1.0, 0.0, 0.0, 1, 1.0).unwrap();
        assert!(b.undefined && b.bound.is_infinite());
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rho_schedules() {
        assert_eq!(RhoSchedule::Harmonic.next(0.0, 1), 0.5);
        assert!((RhoSchedule::Harmonic.next(0.5, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(RhoSchedule::HalvingGap.next(0.5, 7), 0.75);
        assert_eq!("harmonic".parse::<RhoSchedule>().unwrap(), RhoSchedule::Harmonic);
        assert!("linear".parse::<RhoSchedule>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BranchPruneConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.boundary_slack = 0.01;
        assert!(cfg.validate().is_err());
        cfg.boundary_slack = 1e-9;
        cfg.fallback_attempts = 0;
        assert!(cfg.validate().is_err());
    }
}
