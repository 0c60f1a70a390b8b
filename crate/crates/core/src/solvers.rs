//! Step-wise solvers over `(value, gradient)` feedback.
//!
//! [`SolverKind::Bpgrad`] moves along the normalized negative gradient with
//! step `eta_t = (f_t - rho * min f) / L` and momentum `mu`; `rho` follows
//! `1 - 1/m` over phases of `n` evaluations. The remaining kinds are the usual
//! adaptive baselines. Every solver also reports, per step, whether the new
//! point stays outside the Lipschitz balls of a bounded window of recent
//! samples.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::lipschitz::{check_rho, ParamVector, Sample};
use crate::vecops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Bpgrad,
    SgdMomentum,
    Adagrad,
    Adadelta,
    Rmsprop,
    Adam,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Bpgrad,
        SolverKind::SgdMomentum,
        SolverKind::Adagrad,
        SolverKind::Adadelta,
        SolverKind::Rmsprop,
        SolverKind::Adam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bpgrad => "bpgrad",
            SolverKind::SgdMomentum => "sgd",
            SolverKind::Adagrad => "adagrad",
            SolverKind::Adadelta => "adadelta",
            SolverKind::Rmsprop => "rmsprop",
            SolverKind::Adam => "adam",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpgrad" => Ok(Self::Bpgrad),
            "sgd" | "sgd-momentum" => Ok(Self::SgdMomentum),
            "adagrad" => Ok(Self::Adagrad),
            "adadelta" => Ok(Self::Adadelta),
            "rmsprop" => Ok(Self::Rmsprop),
            "adam" => Ok(Self::Adam),
            other => Err(invalid(format!(
                "unknown solver `{other}` (bpgrad | sgd | adagrad | adadelta | rmsprop | adam)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Lipschitz constant; sets the bpgrad step and the condition-check balls.
    pub lipschitz: f64,
    /// Momentum for bpgrad and SGD.
    pub mu: f64,
    /// Evaluations per `rho` phase (`n`).
    pub evals_per_phase: usize,
    /// Maximum number of phases (`N`).
    pub max_phases: usize,
    pub epsilon: f64,
    /// Global learning rate of the baselines (Adadelta scales its update by it).
    pub learning_rate: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// Squared-gradient averaging for RMSProp and Adadelta.
    pub decay: f64,
    /// Denominator constant of the adaptive baselines.
    pub delta: f64,
    /// Number of recent samples kept for the condition check.
    pub window: usize,
    /// Seed for random directions at zero gradients.
    pub seed: u64,
}

impl SolverConfig {
    /// Standard settings for `kind`.
    pub fn defaults_for(kind: SolverKind) -> Self {
        let base = Self {
            kind,
            lipschitz: 20.0,
            mu: 0.9,
            evals_per_phase: usize::MAX,
            max_phases: 1,
            epsilon: 0.0,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            decay: 0.9,
            delta: 1e-8,
            window: 50,
            seed: 0,
        };
        match kind {
            SolverKind::Bpgrad | SolverKind::Adam | SolverKind::Rmsprop => base,
            SolverKind::SgdMomentum => Self { learning_rate: 0.01, ..base },
            SolverKind::Adagrad => Self { learning_rate: 0.01, ..base },
            SolverKind::Adadelta => Self { learning_rate: 1.0, decay: 0.95, delta: 1e-6, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(invalid(format!("L must be positive, got {}", self.lipschitz)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(invalid(format!("momentum must lie in [0, 1], got {}", self.mu)));
        }
        if self.evals_per_phase == 0 || self.max_phases == 0 || self.window == 0 {
            return Err(invalid("evals per phase, phase count and window must be at least 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(invalid("epsilon must be nonnegative"));
        }
        if self.kind != SolverKind::Bpgrad && !(self.learning_rate > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("decay", self.decay)] {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.delta > 0.0) {
            return Err(invalid("delta must be positive"));
        }
        Ok(())
    }
}

/// Mutable state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Momentum buffer (bpgrad, SGD).
    pub velocity: Vec<f64>,
    pub running_min: f64,
    pub rho: f64,
    /// 1-based phase index `m`.
    pub phase: usize,
    /// Steps taken so far.
    pub iter: usize,
    /// Squared-gradient accumulator (Adagrad sum, RMSProp/Adadelta average,
    /// Adam second moment).
    pub accum_sq: Vec<f64>,
    /// Adam first moment, Adadelta squared-update average.
    pub accum_aux: Vec<f64>,
}

impl SolverState {
    pub fn new(dim: usize) -> Self {
        Self {
            velocity: vec![0.0; dim],
            running_min: f64::INFINITY,
            rho: 0.0,
            phase: 1,
            iter: 0,
            accum_sq: vec![0.0; dim],
            accum_aux: vec![0.0; dim],
        }
    }
}

/// Left and right sides of the sampling condition for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRecord {
    pub iter: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// `max_i { f_i - L |x_i - x_next| }` vs `rho * min_i f_i` over the window.
///
/// An empty window is vacuously satisfied.
pub fn check_condition(window: &[Sample], x_next: &[f64], iter: usize, rho: f64, lipschitz: f64) -> ConditionRecord {
    if window.is_empty() {
        return ConditionRecord { iter, lhs: f64::NEG_INFINITY, rhs: 0.0, satisfied: true };
    }
    let lhs = window
        .iter()
        .map(|s| s.value - lipschitz * vecops::dist(&s.point, x_next))
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = rho * window.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    ConditionRecord { iter, lhs, rhs, satisfied: lhs <= rhs }
}

/// `<x_i - x_j, grad_unit_at_j> >= 0` for every earlier sample in the window.
pub fn check_cor1(window: &[Sample], x_j: &[f64], grad_unit_at_j: &[f64]) -> bool {
    window.iter().all(|s| {
        let diff: Vec<f64> = s.point.iter().zip(x_j).map(|(a, b)| a - b).collect();
        vecops::dot(&diff, grad_unit_at_j) >= 0.0
    })
}

/// `max(0, (f_t - rho * running_min) / L)`.
pub fn bpgrad_step_size(f_t: f64, running_min: f64, rho: f64, lipschitz: f64) -> f64 {
    ((f_t - rho * running_min) / lipschitz).max(0.0)
}

/// Result of one solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: ParamVector,
    /// Step size: `eta_t` for bpgrad, `|x_{t+1} - x_t|` for the baselines.
    pub eta: f64,
    /// `rho` and phase the step was taken under.
    pub rho: f64,
    pub phase: usize,
    pub condition: ConditionRecord,
    /// The `min f <= eps / (1 - rho)` test passed at a phase boundary.
    pub converged: bool,
    /// The last phase has used up its evaluations.
    pub exhausted: bool,
}

/// A solver instance: configuration, state, and the condition-check window.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: SolverConfig,
    state: SolverState,
    window: VecDeque<Sample>,
    best: Option<(f64, ParamVector)>,
    rng: ChaCha8Rng,
}

impl Solver {
    pub fn new(cfg: SolverConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(invalid("parameter dimension must be positive"));
        }
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let window = VecDeque::with_capacity(cfg.window);
        Ok(Self { cfg, state: SolverState::new(dim), window, best: None, rng })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Samples currently held for the condition check, oldest first.
    pub fn window(&self) -> impl Iterator<Item = &Sample> {
        self.window.iter()
    }

    /// Best evaluated point so far and its value.
    pub fn best(&self) -> Option<(f64, &ParamVector)> {
        self.best.as_ref().map(|(v, p)| (*v, p))
    }

    /// Takes one step from `x_t` given its objective estimate and gradient.
    pub fn step(&mut self, x_t: &ParamVector, f_t: f64, grad: &[f64]) -> Result<StepOutcome> {
        let dim = self.state.velocity.len();
        let iter = self.state.iter + 1;
        if x_t.dim() != dim || grad.len() != dim {
            return Err(invalid(format!("step expects dimension {dim}")));
        }
        if !f_t.is_finite() {
            return Err(Error::NumericFailure { iter, detail: format!("objective is {f_t}") });
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NumericFailure { iter, detail: format!("gradient component {k} is {}", grad[k]) });
        }

        if f_t < self.state.running_min {
            self.state.running_min = f_t;
        }
        if self.best.as_ref().is_none_or(|(v, _)| f_t < *v) {
            self.best = Some((f_t, x_t.clone()));
        }

        let (rho, phase) = (self.state.rho, self.state.phase);
        let (next, eta) = match self.cfg.kind {
            SolverKind::Bpgrad => self.bpgrad_update(x_t, f_t, grad),
            _ => {
                let next = self.baseline_update(x_t, grad);
                let eta = vecops::dist(&next, x_t);
                (next, eta)
            }
        };
        let next = ParamVector::new(next).map_err(|_| Error::NumericFailure {
            iter,
            detail: "update produced a non-finite parameter".into(),
        })?;

        if self.window.len() == self.cfg.window {
            self.window.pop_front();
        }
        self.window.push_back(Sample { point: x_t.clone(), value: f_t, gradient: None, index: iter });
        let condition = check_condition(self.window.make_contiguous(), &next, iter, rho, self.cfg.lipschitz);

        self.state.iter = iter;
        let (converged, exhausted) = self.advance_phase();
        Ok(StepOutcome { next, eta, rho, phase, condition, converged, exhausted })
    }

    /// Phase bookkeeping after a step; returns `(converged, exhausted)`.
    fn advance_phase(&mut self) -> (bool, bool) {
        let st = &mut self.state;
        let boundary = self.cfg.evals_per_phase.saturating_mul(st.phase);
        if st.iter < boundary {
            return (false, false);
        }
        if st.running_min <= self.cfg.epsilon / (1.0 - st.rho) {
            return (true, false);
        }
        if st.phase >= self.cfg.max_phases {
            return (false, true);
        }
        st.phase += 1;
        st.rho = 1.0 - 1.0 / st.phase as f64;
        debug_assert!(check_rho(st.rho).is_ok());
        (false, false)
    }

    /// `v <- mu v - eta * g/|g|`, `x <- x + v`.
    fn bpgrad_update(&mut self, x_t: &[f64], f_t: f64, grad: &[f64]) -> (Vec<f64>, f64) {
        let eta = bpgrad_step_size(f_t, self.state.running_min, self.state.rho, self.cfg.lipschitz);
        let dir = vecops::unit(grad).unwrap_or_else(|| vecops::random_unit(grad.len(), &mut self.rng));
        let mu = self.cfg.mu;
        let next = self
            .state
            .velocity
            .iter_mut()
            .zip(&dir)
            .zip(x_t)
            .map(|((v, d), x)| {
                *v = mu * *v - eta * d;
                x + *v
            })
            .collect();
        (next, eta)
    }

    fn baseline_update(&mut self, x_t: &[f64], grad: &[f64]) -> Vec<f64> {
        let c = &self.cfg;
        let st = &mut self.state;
        let lr = c.learning_rate;
        let mut next = x_t.to_vec();
        match c.kind {
            SolverKind::Bpgrad => unreachable!("handled by bpgrad_update"),
            SolverKind::SgdMomentum => {
                for k in 0..next.len() {
                    st.velocity[k] = c.mu * st.velocity[k] - lr * grad[k];
                    next[k] += st.velocity[k];
                }
            }
            SolverKind::Adagrad => {
                for k in 0..next.len() {
                    st.accum_sq[k] += grad[k] * grad[k];
                    next[k] -= lr * grad[k] / (st.accum_sq[k].sqrt() + c.delta);
                }
            }
            SolverKind::Adadelta => {
                for k in 0..next.len() {
                    st.accum_sq[k] = c.decay * st.accum_sq[k] + (1.0 - c.decay) * grad[k] * grad[k];
                    let update = -((st.accum_aux[k] + c.delta).sqrt() / (st.accum_sq[k] + c.delta).sqrt()) * grad[k];
                    st.accum_aux[k] = c.decay * st.accum_aux[k] + (1.0 - c.decay) * update * update;
                    next[k] += lr * update;
                }
            }
            SolverKind::Rmsprop => {
                for k in 0..next.len() {
                    st.accum_sq[k] = c.decay * st.accum_sq[k] + (1.0 - c.decay) * grad[k] * grad[k];
                    next[k] -= lr * grad[k] / (st.accum_sq[k].sqrt() + c.delta);
                }
            }
            SolverKind::Adam => {
                let t = (st.iter + 1) as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                for k in 0..next.len() {
                    st.accum_aux[k] = c.beta1 * st.accum_aux[k] + (1.0 - c.beta1) * grad[k];
                    st.accum_sq[k] = c.beta2 * st.accum_sq[k] + (1.0 - c.beta2) * grad[k] * grad[k];
                    let m_hat = st.accum_aux[k] / bc1;
                    let v_hat = st.accum_sq[k] / bc2;
                    next[k] -= lr * m_hat / (v_hat.sqrt() + c.delta);
                }
            }
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn sample(x: &[f64], f: f64, index: usize) -> Sample {
        Sample { point: pv(x), value: f, gradient: None, index }
    }

    fn bpgrad(l: f64, mu: f64) -> SolverConfig {
        SolverConfig { lipschitz: l, mu, ..SolverConfig::defaults_for(SolverKind::Bpgrad) }
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(bpgrad_step_size(4.0, 4.0, 0.0, 10.0), 0.4);
        assert_eq!(bpgrad_step_size(4.0, 4.0, 0.5, 10.0), 0.2);
        assert!((bpgrad_step_size(6.0, 4.0, 0.75, 15.0) - 0.2).abs() < 1e-15);
        assert_eq!(bpgrad_step_size(1.0, 4.0, 0.5, 10.0), 0.0);
    }

    #[test]
    fn plain_bpgrad_step() {
        let mut s = Solver::new(bpgrad(10.0, 0.0), 2).unwrap();
        let out = s.step(&pv(&[1.0, 1.0]), 5.0, &[3.0, 4.0]).unwrap();
        // eta = 0.5 along (0.6, 0.8)
        assert!((out.next[0] - 0.7).abs() < 1e-15);
        assert!((out.next[1] - 0.6).abs() < 1e-15);
        assert_eq!(out.eta, 0.5);
        assert_eq!(s.state().iter, 1);
    }

    #[test]
    fn momentum_first_step_matches_plain() {
        let mut a = Solver::new(bpgrad(10.0, 0.0), 2).unwrap();
        let mut b = Solver::new(bpgrad(10.0, 0.9), 2).unwrap();
        let x = pv(&[0.3, -2.0]);
        assert_eq!(a.step(&x, 2.5, &[1.0, -1.0]).unwrap().next, b.step(&x, 2.5, &[1.0, -1.0]).unwrap().next);
    }

    #[test]
    fn rejects_non_finite_feedback() {
        let mut s = Solver::new(bpgrad(10.0, 0.0), 1).unwrap();
        assert!(matches!(s.step(&pv(&[0.0]), f64::NAN, &[1.0]), Err(Error::NumericFailure { iter: 1, .. })));
        assert!(matches!(s.step(&pv(&[0.0]), 1.0, &[f64::INFINITY]), Err(Error::NumericFailure { .. })));
    }

    #[test]
    fn zero_gradient_takes_a_unit_random_step() {
        let mut s = Solver::new(bpgrad(2.0, 0.0), 3).unwrap();
        let out = s.step(&pv(&[0.0, 0.0, 0.0]), 1.0, &[0.0, 0.0, 0.0]).unwrap();
        assert!((vecops::norm(&out.next) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn phases_follow_harmonic_rho() {
        let cfg = SolverConfig { evals_per_phase: 3, max_phases: 4, ..bpgrad(10.0, 0.0) };
        let mut s = Solver::new(cfg, 1).unwrap();
        let mut x = pv(&[0.0]);
        let mut rhos = Vec::new();
        for _ in 0..12 {
            let out = s.step(&x, 1.0, &[1.0]).unwrap();
            rhos.push(out.rho);
            x = out.next;
            if out.exhausted {
                break;
            }
        }
        let expected: Vec<f64> =
            [1.0, 2.0, 3.0, 4.0].iter().flat_map(|m: &f64| std::iter::repeat_n(1.0 - 1.0 / m, 3)).collect();
        assert_eq!(rhos, expected);
    }

    #[test]
    fn converged_signal_at_phase_boundary() {
        let cfg = SolverConfig { evals_per_phase: 2, max_phases: 5, epsilon: 0.6, ..bpgrad(10.0, 0.0) };
        let mut s = Solver::new(cfg, 1).unwrap();
        let first = s.step(&pv(&[0.0]), 1.0, &[1.0]).unwrap();
        assert!(!first.converged);
        // boundary of phase 1: min 1.0 > 0.6 / 1, advance to rho = 1/2
        let second = s.step(&first.next, 1.0, &[1.0]).unwrap();
        assert!(!second.converged);
        assert_eq!(s.state().rho, 0.5);
        let third = s.step(&second.next, 1.0, &[1.0]).unwrap();
        assert!(!third.converged);
        // boundary of phase 2: 1.0 <= 0.6 / 0.5
        assert!(s.step(&third.next, 1.0, &[1.0]).unwrap().converged);
    }

    #[test]
    fn sgd_vanilla_step() {
        let cfg = SolverConfig { mu: 0.0, learning_rate: 0.1, ..SolverConfig::defaults_for(SolverKind::SgdMomentum) };
        let mut s = Solver::new(cfg, 2).unwrap();
        let out = s.step(&pv(&[1.0, 2.0]), 1.0, &[0.5, -1.0]).unwrap();
        assert!((out.next[0] - 0.95).abs() < 1e-15);
        assert!((out.next[1] - 2.1).abs() < 1e-15);
    }

    #[test]
    fn adagrad_first_step_is_sign_scaled() {
        let cfg = SolverConfig { learning_rate: 0.1, ..SolverConfig::defaults_for(SolverKind::Adagrad) };
        let mut s = Solver::new(cfg, 2).unwrap();
        let out = s.step(&pv(&[1.0, 1.0]), 1.0, &[2.0, -0.5]).unwrap();
        let d = 1e-8;
        assert_eq!(out.next[0], 1.0 - 0.1 * 2.0 / (2.0 + d));
        assert_eq!(out.next[1], 1.0 + 0.1 * 0.5 / (0.5 + d));
    }

    #[test]
    fn condition_single_ball_boundary() {
        // eta = f/L exactly, dyadic values keep the arithmetic exact
        let w = [sample(&[1.0, 2.0], 4.0, 1)];
        let rec = check_condition(&w, &[0.5, 2.0], 1, 0.0, 8.0);
        assert_eq!(rec.lhs, 0.0);
        assert_eq!(rec.rhs, 0.0);
        assert!(rec.satisfied);
        // shorter step stays inside the ball
        let rec = check_condition(&w, &[0.75, 2.0], 1, 0.0, 8.0);
        assert!(rec.lhs > rec.rhs && !rec.satisfied);
        assert!(check_condition(&[], &[0.0], 3, 0.5, 1.0).satisfied);
    }

    #[test]
    fn cor1_examples() {
        // descending toward -x with gradient +1: earlier points lie at larger x
        let w = [sample(&[3.0], 3.0, 1), sample(&[2.0], 2.0, 2)];
        assert!(check_cor1(&w, &[1.0], &[1.0]));
        // reversal: x_j jumped past x_{j-1}
        assert!(!check_cor1(&w, &[2.5], &[-1.0]));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { mu: 1.5, ..bpgrad(1.0, 0.0) }.validate().is_err());
        assert!(SolverConfig { lipschitz: 0.0, ..bpgrad(1.0, 0.0) }.validate().is_err());
        assert!(SolverConfig { learning_rate: 0.0, ..SolverConfig::defaults_for(SolverKind::Adam) }.validate().is_err());
        for k in SolverKind::ALL {
            assert!(SolverConfig::defaults_for(k).validate().is_ok());
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
    }
}
