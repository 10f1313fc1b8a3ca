//! Stochastic shrinking-hypercube search over the four retarder voltages.
//!
//! Each iteration draws `K` points uniformly from a box of side `R` centered
//! on the current best point, measures the QBER at each, and moves the center
//! to the lowest reading. The box side follows the lowest reading:
//! `R = A * (q_min - q_threshold)^B`, clamped to `[r_min, r_max]`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devices::{DeviceError, FiberChannel, LcvrStack};
use crate::polcore::{apply_local, singlet, JonesVector, StokesVector, Unitary2};
use crate::qkd::{polarization_qber, sample_qber_estimate, true_qber, DetectionConfig, QberEstimate};

pub type Voltages = [f64; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("objective evaluation failed at {voltages:?}: {cause}")]
    Evaluation { voltages: Voltages, cause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Points evaluated per iteration (K).
    pub points_per_iteration: usize,
    /// Shrink gain A, volts.
    pub shrink_gain: f64,
    /// Shrink exponent B.
    pub shrink_exponent: f64,
    pub qber_threshold: f64,
    /// Per-axis `[low, high]` voltage bounds.
    pub bounds: [[f64; 2]; 4],
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            points_per_iteration: 10,
            shrink_gain: 6.5,
            shrink_exponent: 2.0,
            qber_threshold: 0.04,
            bounds: [[1.0, 6.0]; 4],
            r_min: 0.7,
            r_max: 5.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::InvalidConfig(m));
        if self.points_per_iteration < 1 {
            return bad("points_per_iteration must be >= 1".into());
        }
        if !(self.shrink_gain.is_finite() && self.shrink_gain > 0.0) {
            return bad("shrink_gain must be > 0".into());
        }
        if !self.shrink_exponent.is_finite() {
            return bad("shrink_exponent must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.qber_threshold) {
            return bad("qber_threshold must be in [0, 1]".into());
        }
        for (i, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bounds[{i}]: low must be < high"));
            }
        }
        if !(self.r_min > 0.0 && self.r_min <= self.r_max && self.r_max.is_finite()) {
            return bad("need 0 < r_min <= r_max".into());
        }
        Ok(())
    }

    pub fn midpoint(&self) -> Voltages {
        std::array::from_fn(|i| 0.5 * (self.bounds[i][0] + self.bounds[i][1]))
    }

    pub fn contains(&self, v: &Voltages) -> bool {
        v.iter().zip(self.bounds.iter()).all(|(x, [lo, hi])| x >= lo && x <= hi)
    }
}

/// `clamp(A * max(q_min - q_threshold, 0)^B, r_min, r_max)`
pub fn shrink_radius(q_min: f64, cfg: &SearchConfig) -> f64 {
    let excess = (q_min - cfg.qber_threshold).max(0.0);
    (cfg.shrink_gain * excess.powf(cfg.shrink_exponent)).clamp(cfg.r_min, cfg.r_max)
}

/// `K` points uniform in the box of side `range` around `center`, each
/// coordinate clamped to its bound after drawing.
pub fn sample_hypercube<R: Rng + ?Sized>(
    center: &Voltages,
    range: f64,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Vec<Voltages> {
    (0..cfg.points_per_iteration)
        .map(|_| {
            std::array::from_fn(|i| {
                let u: f64 = rng.random();
                let x = center[i] + range * (u - 0.5);
                x.clamp(cfg.bounds[i][0], cfg.bounds[i][1])
            })
        })
        .collect()
}

/// What the search observes at one voltage setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub estimate: QberEstimate,
    /// Noise-free QBER, when the objective can report it (simulations).
    pub true_qber: Option<f64>,
    /// Output polarization of a fixed probe through the fiber, if modeled.
    pub probe_stokes: Option<StokesVector>,
}

/// A noisy QBER measurement at given voltages. Every evaluation costs
/// [`Objective::evaluation_cost`] seconds of simulated time.
pub trait Objective {
    fn evaluate(&mut self, voltages: &Voltages) -> Result<Evaluation, OptimizerError>;

    fn evaluation_cost(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub center: Voltages,
    pub range: f64,
    pub iteration: u64,
    pub best_estimate: QberEstimate,
    /// Objective evaluations charged so far.
    pub evaluations: u64,
    /// Cost of one evaluation, seconds.
    pub evaluation_cost: f64,
}

impl SearchState {
    /// Full-space start: center at the bounds midpoint, range `r_max`.
    pub fn initial(cfg: &SearchConfig, evaluation_cost: f64) -> Self {
        SearchState {
            center: cfg.midpoint(),
            range: cfg.r_max,
            iteration: 0,
            best_estimate: QberEstimate::empty(),
            evaluations: 0,
            evaluation_cost,
        }
    }

    /// Simulated seconds spent on evaluations.
    pub fn elapsed(&self) -> f64 {
        self.evaluations as f64 * self.evaluation_cost
    }
}

/// One evaluated point of an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub voltages: Voltages,
    pub evaluation: Evaluation,
    /// Simulated time at the end of this evaluation.
    pub elapsed: f64,
}

/// Result of [`search_iteration`]: the next state and the points measured.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub state: SearchState,
    pub samples: Vec<Sample>,
}

/// Index of the lowest estimate; ties go to the lowest index.
pub fn argmin_estimate(estimates: &[QberEstimate]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in estimates.iter().enumerate() {
        let k = e.rank_key();
        match best {
            Some((_, b)) if k >= b => {}
            _ => best = Some((i, k)),
        }
    }
    best.map(|(i, _)| i)
}

/// Samples `K` points around the current center, measures each, and moves
/// to the best. On evaluation failure the prior state is left untouched and
/// the cause is returned.
pub fn search_iteration<O, R>(
    state: &SearchState,
    obj: &mut O,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<IterationOutcome, OptimizerError>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let points = sample_hypercube(&state.center, state.range, cfg, rng);
    let mut samples = Vec::with_capacity(points.len());
    let mut evaluations = state.evaluations;
    for p in points {
        let evaluation = obj.evaluate(&p)?;
        evaluations += 1;
        samples.push(Sample {
            voltages: p,
            evaluation,
            elapsed: evaluations as f64 * state.evaluation_cost,
        });
    }
    let estimates: Vec<QberEstimate> = samples.iter().map(|s| s.evaluation.estimate).collect();
    let best = argmin_estimate(&estimates).expect("at least one point per iteration");
    let best_estimate = estimates[best];
    let next = SearchState {
        center: samples[best].voltages,
        range: shrink_radius(best_estimate.value, cfg),
        iteration: state.iteration + 1,
        best_estimate,
        evaluations,
        evaluation_cost: state.evaluation_cost,
    };
    Ok(IterationOutcome { state: next, samples })
}

/// Simulated compensation setup: singlet source, Alice's short arm with the
/// retarder stack, Bob's arm through the drifting deployed fiber.
#[derive(Debug, Clone)]
pub struct Plant {
    pub stack: LcvrStack,
    pub fiber: FiberChannel,
    /// Static rotation of Alice's local patchcord.
    pub local_arm: Unitary2,
    pub detection: DetectionConfig,
    /// Probe polarization whose fiber output is logged.
    pub probe: JonesVector,
    /// Simulated seconds elapsed.
    pub clock: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl Plant {
    pub fn new(
        stack: LcvrStack,
        fiber: FiberChannel,
        local_arm: Unitary2,
        detection: DetectionConfig,
        rng: rand_chacha::ChaCha8Rng,
    ) -> Self {
        Plant {
            stack,
            fiber,
            local_arm,
            detection,
            probe: JonesVector::H,
            clock: 0.0,
            rng,
        }
    }

    /// Exact QBER at the given voltages for the current fiber state.
    pub fn true_qber_at(&self, voltages: &Voltages) -> Result<f64, DeviceError> {
        let t = self.stack.stack_unitary(voltages)?;
        let state = apply_local(&(t * self.local_arm), &self.fiber.rotation, &singlet());
        // the stack and fiber unitaries keep the state normalized
        let q_pol = polarization_qber(&state).unwrap_or(0.5);
        Ok(true_qber(q_pol, &self.detection))
    }

    /// Compensator setting that would exactly undo the fiber: `T = R_B R_A^dagger`.
    pub fn ideal_compensation(&self) -> Unitary2 {
        self.fiber.rotation * self.local_arm.dagger()
    }

    /// Lets the fiber evolve for `dt` seconds.
    pub fn advance(&mut self, dt: f64) {
        if dt > 0.0 {
            self.fiber = self.fiber.evolve(dt, &mut self.rng);
            self.clock += dt;
        }
    }

    /// Measures a block at the current fiber state without charging time.
    pub fn measure(&mut self, voltages: &Voltages) -> Result<Evaluation, DeviceError> {
        let q = self.true_qber_at(voltages)?;
        let estimate = sample_qber_estimate(q, &self.detection, &mut self.rng);
        Ok(Evaluation {
            estimate,
            true_qber: Some(q),
            probe_stokes: Some(self.fiber.probe_stokes(&self.probe)),
        })
    }

    pub fn rng_mut(&mut self) -> &mut rand_chacha::ChaCha8Rng {
        &mut self.rng
    }
}

impl Objective for Plant {
    fn evaluate(&mut self, voltages: &Voltages) -> Result<Evaluation, OptimizerError> {
        let map = |e: DeviceError| OptimizerError::Evaluation {
            voltages: *voltages,
            cause: e.to_string(),
        };
        self.stack.retardances(voltages).map_err(map)?;
        self.advance(self.evaluation_cost());
        self.measure(voltages).map_err(map)
    }

    fn evaluation_cost(&self) -> f64 {
        self.stack.response_time() + self.detection.accumulation_time
    }
}

/// One row of a control-loop trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub elapsed: f64,
    pub qber_est: f64,
    pub qber_true: f64,
    pub voltages: Voltages,
    pub range: f64,
    pub stokes: [f64; 3],
    /// Search iteration this record belongs to (0 = initial state).
    pub iteration: u64,
}

/// Per-iteration summary kept alongside the per-evaluation records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSummary {
    pub iteration: u64,
    pub elapsed: f64,
    pub best_estimate: f64,
    /// True QBER at the chosen center when it was measured.
    pub center_true_qber: f64,
    pub center: Voltages,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlTrace {
    pub records: Vec<TraceRecord>,
    pub iterations: Vec<IterationSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlLoopError {
    pub error: OptimizerError,
    pub partial: ControlTrace,
}

impl std::fmt::Display for ControlLoopError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} records)", self.error, self.partial.records.len())
    }
}

impl std::error::Error for ControlLoopError {}

fn record_of(
    elapsed: f64,
    voltages: Voltages,
    range: f64,
    iteration: u64,
    ev: &Evaluation,
) -> TraceRecord {
    TraceRecord {
        elapsed,
        qber_est: ev.estimate.value,
        qber_true: ev.true_qber.unwrap_or(f64::NAN),
        voltages,
        range,
        stokes: ev.probe_stokes.map(|s| s.axis()).unwrap_or([0.0; 3]),
        iteration,
    }
}

/// Hook invoked before each iteration; lets callers script disturbances.
pub trait LoopHook {
    fn before_iteration(&mut self, _plant: &mut Plant, _state: &SearchState, _trace: &ControlTrace) {}
}

impl LoopHook for () {}

/// Runs the search continuously on `plant` until `duration` simulated seconds
/// have been spent. The fiber evolves by the time charged for every
/// evaluation. The trace starts with a reading at the initial center.
pub fn run_control_loop<R: Rng + ?Sized>(
    plant: &mut Plant,
    cfg: &SearchConfig,
    duration: f64,
    rng: &mut R,
) -> Result<ControlTrace, ControlLoopError> {
    run_control_loop_with(plant, cfg, duration, rng, &mut ())
}

pub fn run_control_loop_with<R: Rng + ?Sized, H: LoopHook + ?Sized>(
    plant: &mut Plant,
    cfg: &SearchConfig,
    duration: f64,
    rng: &mut R,
    hook: &mut H,
) -> Result<ControlTrace, ControlLoopError> {
    let mut trace = ControlTrace::default();
    let mut state = match control_start(plant, cfg, &mut trace) {
        Ok(s) => s,
        Err(error) => return Err(ControlLoopError { error, partial: trace }),
    };
    let per_iteration = cfg.points_per_iteration as f64 * state.evaluation_cost;
    while state.elapsed() + per_iteration <= duration {
        state = match control_step(plant, &state, cfg, rng, hook, &mut trace) {
            Ok(s) => s,
            Err(error) => return Err(ControlLoopError { error, partial: trace }),
        };
    }
    Ok(trace)
}

/// Measures the starting center (bounds midpoint) without charging time and
/// records it as the first trace row.
pub fn control_start(
    plant: &mut Plant,
    cfg: &SearchConfig,
    trace: &mut ControlTrace,
) -> Result<SearchState, OptimizerError> {
    let mut state = SearchState::initial(cfg, plant.evaluation_cost());
    let initial = plant.measure(&state.center).map_err(|e| OptimizerError::Evaluation {
        voltages: state.center,
        cause: e.to_string(),
    })?;
    state.best_estimate = initial.estimate;
    trace.records.push(record_of(0.0, state.center, state.range, 0, &initial));
    Ok(state)
}

/// One loop iteration: hook, search, then the evaluations and an iteration
/// summary appended to `trace`.
pub fn control_step<R: Rng + ?Sized, H: LoopHook + ?Sized>(
    plant: &mut Plant,
    state: &SearchState,
    cfg: &SearchConfig,
    rng: &mut R,
    hook: &mut H,
    trace: &mut ControlTrace,
) -> Result<SearchState, OptimizerError> {
    hook.before_iteration(plant, state, trace);
    let outcome = search_iteration(state, plant, cfg, rng)?;
    let it = outcome.state.iteration;
    let mut center_true = f64::NAN;
    for s in &outcome.samples {
        trace.records.push(record_of(s.elapsed, s.voltages, state.range, it, &s.evaluation));
        if s.voltages == outcome.state.center && center_true.is_nan() {
            center_true = s.evaluation.true_qber.unwrap_or(f64::NAN);
        }
    }
    let next = outcome.state;
    trace.iterations.push(IterationSummary {
        iteration: it,
        elapsed: next.elapsed(),
        best_estimate: next.best_estimate.value,
        center_true_qber: center_true,
        center: next.center,
        range: next.range,
    });
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polcore::random_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Noise-free synthetic objective with fixed cost.
    struct Synthetic<F: FnMut(&Voltages) -> f64> {
        f: F,
        cost: f64,
        seen: Vec<Voltages>,
    }

    impl<F: FnMut(&Voltages) -> f64> Objective for Synthetic<F> {
        fn evaluate(&mut self, v: &Voltages) -> Result<Evaluation, OptimizerError> {
            self.seen.push(*v);
            let q = (self.f)(v);
            Ok(Evaluation {
                estimate: QberEstimate { value: q, uncertainty: 0.0, sample_size: 1000 },
                true_qber: Some(q),
                probe_stokes: None,
            })
        }
        fn evaluation_cost(&self) -> f64 {
            self.cost
        }
    }

    #[test]
    fn shrink_radius_values() {
        let cfg = SearchConfig { r_min: 0.05, ..SearchConfig::default() };
        assert!((shrink_radius(0.58, &cfg) - 1.8954).abs() < 1e-12);
        assert_eq!(shrink_radius(0.04, &cfg), 0.05);
        assert!((6.5f64 * 0.03 * 0.03 - 0.00585).abs() < 1e-15);
        assert_eq!(shrink_radius(0.07, &cfg), 0.05);
        assert_eq!(shrink_radius(0.0, &cfg), 0.05);
        assert_eq!(shrink_radius(1.0, &cfg), 5.0);
    }

    #[test]
    fn degenerate_and_clamped_hypercubes() {
        let cfg = SearchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = [2.0, 3.0, 4.0, 5.0];
        for p in sample_hypercube(&c, 0.0, &cfg, &mut rng) {
            assert_eq!(p, c);
        }
        for corner in [[1.0; 4], [6.0; 4], [1.0, 6.0, 1.0, 6.0]] {
            for r in [0.05, 1.0, 5.0, 50.0] {
                for p in sample_hypercube(&corner, r, &cfg, &mut rng) {
                    assert!(cfg.contains(&p));
                }
            }
        }
    }

    #[test]
    fn full_range_hypercube_spans_space() {
        let cfg = SearchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for _ in 0..1000 {
            for p in sample_hypercube(&cfg.midpoint(), cfg.r_max, &cfg, &mut rng) {
                for i in 0..4 {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
        }
        for i in 0..4 {
            assert!((hi[i] - lo[i]) / 5.0 >= 0.95);
        }
    }

    #[test]
    fn flat_objective() {
        let cfg = SearchConfig::default();
        let mut obj = Synthetic { f: |_: &Voltages| 0.3, cost: 2.005, seen: vec![] };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut state = SearchState::initial(&cfg, obj.evaluation_cost());
        for n in 1..=5u64 {
            let prior_center = state.center;
            let prior_range = state.range;
            state = search_iteration(&state, &mut obj, &cfg, &mut rng).unwrap().state;
            assert!((shrink_radius(0.3, &cfg) - state.range).abs() == 0.0);
            for i in 0..4 {
                assert!((state.center[i] - prior_center[i]).abs() <= prior_range / 2.0 + 1e-12);
            }
            // ties go to the first point drawn
            assert_eq!(state.center, obj.seen[((n - 1) * 10) as usize]);
            let k = cfg.points_per_iteration as u64;
            assert_eq!(state.elapsed(), (n * k) as f64 * 2.005);
        }
    }

    #[test]
    fn argmin_is_shift_invariant_and_stable() {
        let mk = |v: f64| QberEstimate { value: v, uncertainty: 0.0, sample_size: 10 };
        let xs: Vec<QberEstimate> = [0.3, 0.1, 0.2, 0.1].iter().map(|&v| mk(v)).collect();
        assert_eq!(argmin_estimate(&xs), Some(1));
        let shifted: Vec<QberEstimate> = xs.iter().map(|e| mk(e.value + 0.25)).collect();
        assert_eq!(argmin_estimate(&shifted), Some(1));
        let with_empty = vec![QberEstimate::empty(), mk(0.9)];
        assert_eq!(argmin_estimate(&with_empty), Some(1));
    }

    #[test]
    fn failed_evaluation_keeps_prior_state() {
        struct Failing;
        impl Objective for Failing {
            fn evaluate(&mut self, v: &Voltages) -> Result<Evaluation, OptimizerError> {
                Err(OptimizerError::Evaluation { voltages: *v, cause: "detector offline".into() })
            }
            fn evaluation_cost(&self) -> f64 {
                1.0
            }
        }
        let cfg = SearchConfig::default();
        let state = SearchState::initial(&cfg, 1.0);
        let before = state.clone();
        let err = search_iteration(&state, &mut Failing, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(OptimizerError::Evaluation { .. })));
        assert_eq!(state, before);
    }

    /// Seeded-ensemble oracle on a noise-free quadratic bowl.
    #[test]
    fn quadratic_bowl_convergence() {
        let cfg = SearchConfig { r_min: 0.05, ..SearchConfig::default() };
        let target = [2.3, 4.1, 3.3, 1.9];
        let mut hits = 0;
        for seed in 0..100 {
            let mut obj = Synthetic {
                f: |v: &Voltages| {
                    let d2: f64 = v.iter().zip(target.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                    0.04 + 0.5 * d2
                },
                cost: 2.005,
                seen: vec![],
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = SearchState::initial(&cfg, obj.evaluation_cost());
            for _ in 0..50 {
                state = search_iteration(&state, &mut obj, &cfg, &mut rng).unwrap().state;
            }
            let dist = state
                .center
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dist <= 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100 seeds converged");
    }

    fn static_plant(seed: u64) -> Plant {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fiber = FiberChannel {
            rotation: random_unitary(&mut rng),
            drift_sigma: 0.0,
            jump_rate: 0.0,
            ..FiberChannel::default()
        };
        Plant::new(LcvrStack::default(), fiber, Unitary2::IDENTITY, DetectionConfig::default(), rng)
    }

    #[test]
    fn ideal_compensation_reaches_floor() {
        let plant = static_plant(3);
        let v = plant.stack.decompose_to_voltages(&plant.ideal_compensation()).unwrap();
        assert!((plant.true_qber_at(&v).unwrap() - 0.04).abs() < 1e-6);
    }

    #[test]
    fn short_duration_yields_initial_record_only() {
        let mut plant = static_plant(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trace = run_control_loop(&mut plant, &SearchConfig::default(), 1.0, &mut rng).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert!(trace.iterations.is_empty());
        assert_eq!(trace.records[0].elapsed, 0.0);
    }

    #[test]
    fn control_loop_time_accounting_and_bounds() {
        let cfg = SearchConfig::default();
        let mut plant = static_plant(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trace = run_control_loop(&mut plant, &cfg, 300.0, &mut rng).unwrap();
        let per_iter = 10.0 * 2.005;
        assert_eq!(trace.iterations.len(), (300.0 / per_iter) as usize);
        for (n, it) in trace.iterations.iter().enumerate() {
            assert_eq!(it.elapsed, ((n as u64 + 1) * 10) as f64 * 2.005);
        }
        assert!(trace.records.windows(2).all(|w| w[1].elapsed > w[0].elapsed));
        assert!(trace.records.iter().all(|r| cfg.contains(&r.voltages)));
    }

    #[test]
    fn control_loop_is_deterministic() {
        let run = || {
            let mut plant = static_plant(6);
            let mut rng = ChaCha8Rng::seed_from_u64(60);
            run_control_loop(&mut plant, &SearchConfig::default(), 200.0, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig { points_per_iteration: 0, ..SearchConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SearchConfig { r_min: 6.0, ..SearchConfig::default() };
        assert!(bad.validate().is_err());
        let mut bad = SearchConfig::default();
        bad.bounds[2] = [4.0, 3.0];
        assert!(bad.validate().is_err());
    }
}
