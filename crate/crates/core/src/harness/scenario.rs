//! Seeded scenario execution: single optimize runs, drift logs and batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ScenarioConfig, ScenarioKind};
use super::output::{prefixed, render_aggregate, render_summaries, render_trace, write_file};
use super::HarnessError;
use crate::devices::{DeviceError, FiberChannel};
use crate::optimizer::{
    control_start, control_step, ControlTrace, IterationSummary, LoopHook, Plant, SearchState, TraceRecord,
    Voltages,
};
use crate::polcore::{random_unitary, Unitary2};

/// Time-ordered evaluation records plus per-iteration summaries.
pub type RunTrace = ControlTrace;

const STREAM_SETUP: u64 = 0;
const STREAM_PLANT: u64 = 1;
const STREAM_SEARCH: u64 = 2;
const STREAM_DISTURBANCE: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seed of run `index` in a batch rooted at `root`. Every run draws from its
/// own ChaCha key, so consecutive seeds give unrelated streams.
pub fn child_seed(root: u64, index: u64) -> u64 {
    root.wrapping_add(index)
}

/// A fiber jump seen during a run and how long the loop took to recover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    /// Iterations completed when the jump was applied or noticed.
    pub iteration: u64,
    pub elapsed: f64,
    pub scripted: bool,
    /// True QBER at the search center just before and after a scripted jump.
    pub qber_before: Option<f64>,
    pub qber_after: Option<f64>,
    /// Iterations after the jump until the best estimate was back under the
    /// convergence level.
    pub recovery_iterations: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub initial_qber: f64,
    pub final_qber: f64,
    /// First iteration whose best estimate is at or below the convergence level.
    pub iters_to_floor: Option<u64>,
    pub recovered_jumps: u64,
    pub iterations: u64,
    /// Simulated seconds per search iteration.
    pub iteration_time: f64,
    pub jumps: Vec<JumpRecord>,
}

impl RunSummary {
    pub fn convergence_time(&self) -> Option<f64> {
        self.iters_to_floor.map(|n| n as f64 * self.iteration_time)
    }
}

/// Extra statistics of a drift-log run.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftLogSummary {
    pub samples: usize,
    pub jumps: u64,
    pub expected_jumps: f64,
    /// Rows (1-based, after the initial row) during which a jump occurred.
    pub jump_rows: Vec<usize>,
    /// Largest Poincaré-sphere step between consecutive rows without a jump.
    pub max_smooth_step: f64,
    /// Per-row drift scale `drift_sigma * sqrt(period)`.
    pub step_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub trace: RunTrace,
    pub summary: RunSummary,
    pub drift: Option<DriftLogSummary>,
}

/// First iteration whose best estimate is at or below `level`.
pub fn iterations_to_reach(trace: &RunTrace, level: f64) -> Option<u64> {
    trace
        .iterations
        .iter()
        .find(|it| it.best_estimate <= level)
        .map(|it| it.iteration)
}

/// Builds the simulated plant for one run.
pub fn build_plant(cfg: &ScenarioConfig, seed: u64) -> Result<Plant, HarnessError> {
    let stack = cfg.resolved_stack()?;
    let detection = cfg.effective_detection();
    let mut setup = stream(seed, STREAM_SETUP);
    let local_arm = if cfg.fiber.random_local_arm {
        random_unitary(&mut setup)
    } else {
        Unitary2::IDENTITY
    };
    let template = FiberChannel {
        rotation: Unitary2::IDENTITY,
        loss_db: cfg.fiber.loss_db,
        length_km: cfg.fiber.length_km,
        drift_sigma: cfg.fiber.drift_sigma,
        jump_rate: cfg.fiber.jump_rate,
        jump_angle_scale: cfg.fiber.jump_angle_scale,
        jumps: 0,
    };
    let mut plant = Plant::new(stack, template, local_arm, detection, stream(seed, STREAM_PLANT));
    let start = cfg.search.midpoint();
    for _ in 0..10_000 {
        plant.fiber.rotation = random_unitary(&mut setup);
        let q = plant
            .true_qber_at(&start)
            .map_err(|e| HarnessError::Simulation(e.to_string()))?;
        if q >= cfg.fiber.min_initial_qber {
            return Ok(plant);
        }
    }
    Err(HarnessError::Config {
        field: "fiber.min_initial_qber".into(),
        message: "no fiber rotation reaches this starting QBER".into(),
    })
}

/// Rotation angle about `axis` that raises the true QBER at `center` by
/// `increase`, or `None` if this axis cannot.
fn jump_angle(plant: &Plant, center: &Voltages, axis: [f64; 3], increase: f64) -> Option<f64> {
    let q0 = plant.true_qber_at(center).ok()?;
    let target = q0 + increase;
    let q_at = |angle: f64| {
        let mut p = plant.fiber.clone();
        p.rotate(axis, angle);
        let probe = Plant::new(
            plant.stack.clone(),
            p,
            plant.local_arm,
            plant.detection.clone(),
            ChaCha8Rng::seed_from_u64(0),
        );
        probe.true_qber_at(center).unwrap_or(q0)
    };
    let mut lo = 0.0;
    let mut hi = None;
    let mut a = 0.0;
    while a < std::f64::consts::PI {
        a += 0.01;
        if q_at(a) >= target {
            hi = Some(a);
            break;
        }
        lo = a;
    }
    let mut hi = hi?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if q_at(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

struct RunHook {
    scripted_at: Option<u64>,
    increase: f64,
    rng: ChaCha8Rng,
    seen_jumps: u64,
    jumps: Vec<JumpRecord>,
}

impl LoopHook for RunHook {
    fn before_iteration(&mut self, plant: &mut Plant, state: &SearchState, _trace: &ControlTrace) {
        if plant.fiber.jumps > self.seen_jumps {
            self.jumps.push(JumpRecord {
                iteration: state.iteration,
                elapsed: state.elapsed(),
                scripted: false,
                qber_before: None,
                qber_after: None,
                recovery_iterations: None,
            });
            self.seen_jumps = plant.fiber.jumps;
        }
        if self.scripted_at == Some(state.iteration + 1) {
            let before = plant.true_qber_at(&state.center).ok();
            for _ in 0..100 {
                let axis: [f64; 3] = std::array::from_fn(|_| self.rng.random::<f64>() * 2.0 - 1.0);
                let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(0.1..=1.0).contains(&norm) {
                    continue;
                }
                if let Some(angle) = jump_angle(plant, &state.center, axis, self.increase) {
                    plant.fiber.rotate(axis, angle);
                    plant.fiber.jumps += 1;
                    self.seen_jumps = plant.fiber.jumps;
                    self.jumps.push(JumpRecord {
                        iteration: state.iteration,
                        elapsed: state.elapsed(),
                        scripted: true,
                        qber_before: before,
                        qber_after: plant.true_qber_at(&state.center).ok(),
                        recovery_iterations: None,
                    });
                    break;
                }
            }
        }
    }
}

fn summarize(cfg: &ScenarioConfig, seed: u64, trace: &RunTrace, mut jumps: Vec<JumpRecord>) -> RunSummary {
    let level = cfg.search.qber_threshold + cfg.run.convergence_margin;
    for j in &mut jumps {
        j.recovery_iterations = trace
            .iterations
            .iter()
            .find(|it| it.iteration > j.iteration && it.best_estimate <= level)
            .map(|it| it.iteration - j.iteration);
    }
    let initial_qber = trace.records.first().map(|r| r.qber_est).unwrap_or(f64::NAN);
    let final_qber = trace
        .iterations
        .last()
        .map(|it| it.best_estimate)
        .unwrap_or(initial_qber);
    let k = cfg.search.points_per_iteration as f64;
    let eval_cost = cfg.lcvr.channels.iter().map(|c| c.response_time).fold(0.0, f64::max)
        + cfg.detection.accumulation_time;
    RunSummary {
        seed,
        initial_qber,
        final_qber,
        iters_to_floor: iterations_to_reach(trace, level),
        recovered_jumps: jumps.iter().filter(|j| j.recovery_iterations.is_some()).count() as u64,
        iterations: trace.iterations.len() as u64,
        iteration_time: k * eval_cost,
        jumps,
    }
}

fn simulation_error(cfg: &ScenarioConfig, partial: &RunTrace, cause: String) -> HarnessError {
    if let Some(prefix) = &cfg.run.output_prefix {
        // flush what we have before reporting
        let _ = write_file(&prefixed(prefix, ".csv"), &render_trace(&partial.records));
    }
    HarnessError::Simulation(cause)
}

fn run_optimize(cfg: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    let mut session = Session::new(cfg)?;
    while session.state.elapsed() + session.iteration_time() <= cfg.run.duration {
        if let Err(e) = session.step() {
            return Err(simulation_error(cfg, &session.trace, e.to_string()));
        }
    }
    Ok(session.finish())
}

/// An optimize run driven one iteration at a time. Draws from the same
/// seeded streams as [`run_scenario`], so stepping a session for `n`
/// iterations reproduces a run of `n` iterations exactly.
pub struct Session {
    cfg: ScenarioConfig,
    plant: Plant,
    state: SearchState,
    search_rng: ChaCha8Rng,
    hook: RunHook,
    trace: RunTrace,
}

impl Session {
    /// Validates `cfg`, builds the plant for `cfg.run.seed` and measures the
    /// starting point.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let seed = cfg.run.seed;
        let mut plant = build_plant(cfg, seed)?;
        let mut trace = RunTrace::default();
        let state = control_start(&mut plant, &cfg.search, &mut trace)
            .map_err(|e| HarnessError::Simulation(e.to_string()))?;
        Ok(Session {
            cfg: cfg.clone(),
            plant,
            state,
            search_rng: stream(seed, STREAM_SEARCH),
            hook: RunHook {
                scripted_at: cfg.disturbance.at_iteration,
                increase: cfg.disturbance.qber_increase,
                rng: stream(seed, STREAM_DISTURBANCE),
                seen_jumps: 0,
                jumps: Vec::new(),
            },
            trace,
        })
    }

    /// Runs one search iteration; on failure the session is left unchanged.
    pub fn step(&mut self) -> Result<&IterationSummary, HarnessError> {
        self.state = control_step(
            &mut self.plant,
            &self.state,
            &self.cfg.search,
            &mut self.search_rng,
            &mut self.hook,
            &mut self.trace,
        )
        .map_err(|e| HarnessError::Simulation(e.to_string()))?;
        Ok(self.trace.iterations.last().expect("iteration recorded"))
    }

    pub fn state(&self) -> &SearchState {
        &self.state
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    /// Simulated seconds per iteration.
    pub fn iteration_time(&self) -> f64 {
        self.cfg.search.points_per_iteration as f64 * self.state.evaluation_cost
    }

    pub fn finish(self) -> ScenarioResult {
        let summary = summarize(&self.cfg, self.cfg.run.seed, &self.trace, self.hook.jumps);
        ScenarioResult { trace: self.trace, summary, drift: None }
    }
}

fn run_drift_log(cfg: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    let seed = cfg.run.seed;
    let mut plant = build_plant(cfg, seed)?;
    // the few targets just outside the retardance windows get the closest setting
    let voltages = match plant.stack.decompose_to_voltages(&plant.ideal_compensation()) {
        Ok(v) => v,
        Err(DeviceError::DecompositionFailed { closest, .. }) => closest,
        Err(e) => return Err(HarnessError::Simulation(e.to_string())),
    };
    let period = cfg.run.drift_log_period;
    let rows = (cfg.run.duration / period).floor() as usize;
    let mut trace = RunTrace::default();
    let mut jump_rows = Vec::new();
    let mut max_smooth_step: f64 = 0.0;

    let push = |plant: &mut Plant, elapsed: f64, trace: &mut RunTrace| -> Result<(), HarnessError> {
        let ev = plant
            .measure(&voltages)
            .map_err(|e| HarnessError::Simulation(e.to_string()))?;
        trace.records.push(TraceRecord {
            elapsed,
            qber_est: ev.estimate.value,
            qber_true: ev.true_qber.unwrap_or(f64::NAN),
            voltages,
            range: 0.0,
            stokes: ev.probe_stokes.map(|s| s.axis()).unwrap_or([0.0; 3]),
            iteration: 0,
        });
        Ok(())
    };

    push(&mut plant, 0.0, &mut trace)?;
    let mut prev = plant.fiber.probe_stokes(&plant.probe);
    for row in 1..=rows {
        let jumps_before = plant.fiber.jumps;
        plant.advance(period);
        let now = plant.fiber.probe_stokes(&plant.probe);
        if plant.fiber.jumps > jumps_before {
            jump_rows.push(row);
        } else {
            max_smooth_step = max_smooth_step.max(prev.angle_to(&now));
        }
        prev = now;
        push(&mut plant, row as f64 * period, &mut trace)?;
    }

    let initial_qber = trace.records.first().map(|r| r.qber_est).unwrap_or(f64::NAN);
    let final_qber = trace.records.last().map(|r| r.qber_est).unwrap_or(f64::NAN);
    let drift = DriftLogSummary {
        samples: trace.records.len(),
        jumps: plant.fiber.jumps,
        expected_jumps: cfg.fiber.jump_rate * rows as f64 * period,
        jump_rows,
        max_smooth_step,
        step_scale: cfg.fiber.drift_sigma * period.sqrt(),
    };
    let summary = RunSummary {
        seed,
        initial_qber,
        final_qber,
        iters_to_floor: None,
        recovered_jumps: 0,
        iterations: 0,
        iteration_time: 0.0,
        jumps: Vec::new(),
    };
    Ok(ScenarioResult { trace, summary, drift: Some(drift) })
}

/// Runs a single scenario (an optimize run for kinds `optimize` and `batch`)
/// deterministically under `cfg.run.seed`, writing `<prefix>.csv` and
/// `<prefix>_summary.csv` when an output prefix is configured.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    cfg.validate()?;
    let result = match cfg.run.kind {
        ScenarioKind::Optimize | ScenarioKind::Batch => run_optimize(cfg)?,
        ScenarioKind::DriftLog => run_drift_log(cfg)?,
    };
    if let Some(prefix) = &cfg.run.output_prefix {
        write_file(&prefixed(prefix, ".csv"), &render_trace(&result.trace.records))?;
        write_file(
            &prefixed(prefix, "_summary.csv"),
            &render_summaries(std::slice::from_ref(&result.summary)),
        )?;
    }
    Ok(result)
}

/// Batch-level statistics over the per-run summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchAggregate {
    pub runs: usize,
    pub failed_runs: usize,
    /// Fraction of runs converging within `success_iterations`.
    pub success_fraction: f64,
    /// Median over runs; runs that never converge count as infinitely slow.
    pub median_iters_to_floor: Option<f64>,
    pub median_convergence_time: Option<f64>,
    /// 10%, 50% and 90% quantiles of the final best estimate.
    pub final_qber_quantiles: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub runs: Vec<Result<RunSummary, String>>,
    pub aggregate: BatchAggregate,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn median_with_missing(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.map(|x| x.unwrap_or(f64::INFINITY)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2].is_infinite() {
        f64::INFINITY
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

pub fn aggregate(runs: &[Result<RunSummary, String>], success_iterations: u64) -> BatchAggregate {
    let ok: Vec<&RunSummary> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let successes = ok
        .iter()
        .filter(|s| s.iters_to_floor.is_some_and(|n| n <= success_iterations))
        .count();
    let mut finals: Vec<f64> = ok.iter().map(|s| s.final_qber).collect();
    finals.sort_by(f64::total_cmp);
    BatchAggregate {
        runs: runs.len(),
        failed_runs: runs.len() - ok.len(),
        success_fraction: if runs.is_empty() { 0.0 } else { successes as f64 / runs.len() as f64 },
        median_iters_to_floor: median_with_missing(ok.iter().map(|s| s.iters_to_floor.map(|n| n as f64))),
        median_convergence_time: median_with_missing(ok.iter().map(|s| s.convergence_time())),
        final_qber_quantiles: (!finals.is_empty())
            .then(|| [quantile(&finals, 0.1), quantile(&finals, 0.5), quantile(&finals, 0.9)]),
    }
}

/// Config of run `index` within a batch.
pub fn batch_member(cfg: &ScenarioConfig, index: usize) -> ScenarioConfig {
    let mut child = cfg.clone();
    child.run.kind = ScenarioKind::Optimize;
    child.run.seed = child_seed(cfg.run.seed, index as u64);
    child.run.output_prefix = cfg
        .run
        .output_prefix
        .as_ref()
        .map(|p| format!("{p}_run{index:04}"));
    child
}

/// Runs `batch_size` independent optimize scenarios in parallel. Failed runs
/// are recorded and the batch carries on.
pub fn run_batch(cfg: &ScenarioConfig) -> Result<BatchResult, HarnessError> {
    cfg.validate()?;
    let runs: Vec<Result<RunSummary, String>> = (0..cfg.run.batch_size)
        .into_par_iter()
        .map(|i| {
            let child = batch_member(cfg, i);
            run_scenario(&child).map(|r| r.summary).map_err(|e| e.to_string())
        })
        .collect();
    let aggregate = aggregate(&runs, cfg.run.success_iterations);
    if let Some(prefix) = &cfg.run.output_prefix {
        let ok: Vec<RunSummary> = runs.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
        write_file(&prefixed(prefix, "_summary.csv"), &render_summaries(&ok))?;
        write_file(&prefixed(prefix, "_aggregate.csv"), &render_aggregate(&aggregate))?;
    }
    Ok(BatchResult { runs, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_follow_root() {
        assert_eq!(child_seed(42, 0), 42);
        assert_eq!(child_seed(42, 7), 49);
        assert_eq!(child_seed(u64::MAX, 1), 0);
    }

    #[test]
    fn adjacent_seeds_give_unrelated_streams() {
        let a: Vec<u64> = (0..64).map(|_| stream(5, STREAM_SEARCH).random()).collect();
        let mut x = stream(5, STREAM_SEARCH);
        let mut y = stream(6, STREAM_SEARCH);
        let same = (0..1000).filter(|_| x.random::<u64>() == y.random::<u64>()).count();
        assert_eq!(same, 0);
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut p = stream(5, STREAM_PLANT);
        let mut q = stream(5, STREAM_SEARCH);
        assert!((0..1000).all(|_| p.random::<u64>() != q.random::<u64>()));
    }

    #[test]
    fn median_and_quantiles() {
        assert_eq!(median_with_missing([Some(3.0), None, Some(1.0)].into_iter()), Some(3.0));
        assert_eq!(median_with_missing([Some(3.0), None].into_iter()), None);
        assert_eq!(median_with_missing([Some(2.0), Some(4.0)].into_iter()), Some(3.0));
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert!((quantile(&xs, 0.1) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn initial_fiber_meets_starting_qber() {
        let cfg = ScenarioConfig::default();
        for seed in 0..20 {
            let plant = build_plant(&cfg, seed).unwrap();
            assert!(plant.true_qber_at(&cfg.search.midpoint()).unwrap() >= 0.4);
        }
    }

    #[test]
    fn scripted_jump_raises_qber_by_requested_amount() {
        let cfg = ScenarioConfig::default();
        let plant = build_plant(&cfg, 3).unwrap();
        let v = plant.stack.decompose_to_voltages(&plant.ideal_compensation()).unwrap();
        let q0 = plant.true_qber_at(&v).unwrap();
        let axis = [0.3, -0.5, 0.8];
        let angle = jump_angle(&plant, &v, axis, 0.03).unwrap();
        let mut p = plant.clone();
        p.fiber.rotate(axis, angle);
        assert!((p.true_qber_at(&v).unwrap() - q0 - 0.03).abs() < 1e-9);
    }
}
