//! Device models: the liquid-crystal retarder stack used as polarization
//! controller, and the drifting deployed fiber.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polcore::{jones_to_stokes, waveplate, JonesVector, StokesVector, Unitary2};

/// Fast-axis orientations of the four retarders, in the order light meets them.
pub const STACK_AXES: [f64; 4] = [0.0, FRAC_PI_4, 0.0, FRAC_PI_4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("voltage {voltage} V outside channel range [{min}, {max}] V")]
    VoltageOutOfRange { voltage: f64, min: f64, max: f64 },
    #[error("calibration table line {line}: {reason}")]
    CalibrationParse { line: usize, reason: String },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("no retardance setting reproduces the target unitary (best fidelity {best_fidelity})")]
    DecompositionFailed { best_fidelity: f64, closest: [f64; 4] },
    #[error("reading calibration table {path}: {message}")]
    Io { path: String, message: String },
}

/// Voltage-to-retardance response of a single retarder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationCurve {
    /// `delta(V) = delta_max / (1 + (V / v_c)^k)`
    Logistic { delta_max: f64, v_c: f64, k: f64 },
    /// Tabulated samples joined by a monotone piecewise-cubic interpolant.
    Table(CalibrationTable),
}

impl Default for CalibrationCurve {
    fn default() -> Self {
        CalibrationCurve::Logistic {
            delta_max: 1.5 * PI + 0.1,
            v_c: 3.5,
            k: 8.0,
        }
    }
}

impl CalibrationCurve {
    fn eval(&self, v: f64) -> f64 {
        match self {
            CalibrationCurve::Logistic { delta_max, v_c, k } => {
                delta_max / (1.0 + (v / v_c).powf(*k))
            }
            CalibrationCurve::Table(t) => t.eval(v),
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        match self {
            CalibrationCurve::Logistic { delta_max, v_c, k } => {
                if !(delta_max.is_finite() && *delta_max > 0.0) {
                    return Err(DeviceError::InvalidCalibration("delta_max must be > 0".into()));
                }
                if !(v_c.is_finite() && *v_c > 0.0) {
                    return Err(DeviceError::InvalidCalibration("v_c must be > 0".into()));
                }
                if !(k.is_finite() && *k > 0.0) {
                    return Err(DeviceError::InvalidCalibration("k must be > 0".into()));
                }
                Ok(())
            }
            CalibrationCurve::Table(t) => t.validate(),
        }
    }
}

/// Calibration samples `(voltage, retardance)` with strictly increasing voltages
/// and strictly decreasing retardance. Interpolated with Fritsch–Carlson
/// monotone cubic Hermite splines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTable {
    pub voltages: Vec<f64>,
    pub retardances: Vec<f64>,
}

impl CalibrationTable {
    /// Parses the plain-text format: one `voltage_volts retardance_radians`
    /// pair per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, DeviceError> {
        let mut voltages = Vec::new();
        let mut retardances = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(DeviceError::CalibrationParse {
                    line,
                    reason: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| DeviceError::CalibrationParse {
                        line,
                        reason: format!("invalid {what} {s:?}"),
                    })
            };
            let v = parse(fields[0], "voltage")?;
            let d = parse(fields[1], "retardance")?;
            if let Some(&prev) = voltages.last() {
                if v <= prev {
                    return Err(DeviceError::CalibrationParse {
                        line,
                        reason: format!("voltage {v} not greater than previous {prev}"),
                    });
                }
            }
            voltages.push(v);
            retardances.push(d);
        }
        let table = CalibrationTable { voltages, retardances };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, DeviceError> {
        let text = std::fs::read_to_string(path).map_err(|e| DeviceError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let n = self.voltages.len();
        if n < 2 || self.retardances.len() != n {
            return Err(DeviceError::InvalidCalibration(
                "table needs at least 2 samples with matching columns".into(),
            ));
        }
        for w in self.voltages.windows(2) {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(DeviceError::InvalidCalibration(
                    "voltages must be strictly increasing".into(),
                ));
            }
        }
        for w in self.retardances.windows(2) {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less) {
                return Err(DeviceError::InvalidCalibration(
                    "retardance must be strictly decreasing in voltage".into(),
                ));
            }
        }
        if self.retardances[n - 1] < 0.0 {
            return Err(DeviceError::InvalidCalibration("retardance must be >= 0".into()));
        }
        Ok(())
    }

    fn slopes(&self) -> Vec<f64> {
        let x = &self.voltages;
        let y = &self.retardances;
        let n = x.len();
        let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            m[i] = (secants[i - 1] + secants[i]) / 2.0;
        }
        for i in 0..n - 1 {
            let a = m[i] / secants[i];
            let b = m[i + 1] / secants[i];
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                m[i] = t * a * secants[i];
                m[i + 1] = t * b * secants[i];
            }
        }
        m
    }

    fn eval(&self, v: f64) -> f64 {
        let x = &self.voltages;
        let y = &self.retardances;
        let n = x.len();
        if v <= x[0] {
            return y[0];
        }
        if v >= x[n - 1] {
            return y[n - 1];
        }
        let i = x.partition_point(|&xi| xi <= v) - 1;
        let m = self.slopes();
        let h = x[i + 1] - x[i];
        let t = (v - x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y[i] + h10 * h * m[i] + h01 * y[i + 1] + h11 * h * m[i + 1]
    }
}

/// One liquid-crystal variable retarder with its drive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcvrChannel {
    pub v_min: f64,
    pub v_max: f64,
    pub curve: CalibrationCurve,
    /// Settling time after a voltage change, seconds.
    pub response_time: f64,
}

impl Default for LcvrChannel {
    fn default() -> Self {
        LcvrChannel {
            v_min: 1.0,
            v_max: 6.0,
            curve: CalibrationCurve::default(),
            response_time: 0.005,
        }
    }
}

impl LcvrChannel {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_min < self.v_max) {
            return Err(DeviceError::InvalidCalibration("v_min must be < v_max".into()));
        }
        if self.v_min <= 0.0 {
            return Err(DeviceError::InvalidCalibration("v_min must be > 0".into()));
        }
        if !(self.response_time.is_finite() && self.response_time >= 0.0) {
            return Err(DeviceError::InvalidCalibration("response_time must be >= 0".into()));
        }
        self.curve.validate()
    }

    pub fn retardance_of_voltage(&self, v: f64) -> Result<f64, DeviceError> {
        if !(v >= self.v_min && v <= self.v_max) {
            return Err(DeviceError::VoltageOutOfRange {
                voltage: v,
                min: self.v_min,
                max: self.v_max,
            });
        }
        Ok(self.curve.eval(v))
    }

    /// Retardance at `v_min` (the largest the channel can produce).
    pub fn delta_max(&self) -> f64 {
        self.curve.eval(self.v_min)
    }

    /// Retardance at `v_max` (the smallest the channel can produce).
    pub fn delta_min(&self) -> f64 {
        self.curve.eval(self.v_max)
    }

    /// Inverts the calibration by bisection. `delta` must lie within
    /// `[delta_min, delta_max]`.
    pub fn voltage_for_retardance(&self, delta: f64) -> Option<f64> {
        let (lo_d, hi_d) = (self.delta_min(), self.delta_max());
        if delta < lo_d || delta > hi_d {
            return None;
        }
        let (mut lo, mut hi) = (self.v_min, self.v_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.curve.eval(mid) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // pick the closer endpoint of the final bracket
        let v = if (self.curve.eval(lo) - delta).abs() <= (self.curve.eval(hi) - delta).abs() {
            lo
        } else {
            hi
        };
        Some(v)
    }

    /// Maps any retardance onto the achievable window modulo 2π.
    fn wrap_into_range(&self, delta: f64) -> Option<f64> {
        let lo = self.delta_min();
        let hi = self.delta_max();
        let tol = 1e-12;
        let mut d = delta.rem_euclid(TAU);
        if d < lo - tol {
            d += TAU;
        }
        if d >= lo - tol && d <= hi + tol {
            Some(d.clamp(lo, hi))
        } else {
            None
        }
    }
}

/// Four retarders at axes 0°, 45°, 0°, 45°, light passing channel 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcvrStack {
    pub channels: [LcvrChannel; 4],
}

impl Default for LcvrStack {
    fn default() -> Self {
        LcvrStack {
            channels: std::array::from_fn(|_| LcvrChannel::default()),
        }
    }
}

/// Which plates an Euler solution drives; the remaining plate is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Solved {
    First3,
    Last3,
}

impl LcvrStack {
    pub fn axes(&self) -> [f64; 4] {
        STACK_AXES
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        self.channels.iter().try_for_each(LcvrChannel::validate)
    }

    /// Longest settling time across the channels.
    pub fn response_time(&self) -> f64 {
        self.channels.iter().map(|c| c.response_time).fold(0.0, f64::max)
    }

    pub fn retardances(&self, voltages: &[f64; 4]) -> Result<[f64; 4], DeviceError> {
        let mut out = [0.0; 4];
        for (i, ch) in self.channels.iter().enumerate() {
            out[i] = ch.retardance_of_voltage(voltages[i])?;
        }
        Ok(out)
    }

    pub fn unitary_of_retardances(deltas: &[f64; 4]) -> Unitary2 {
        deltas
            .iter()
            .zip(STACK_AXES.iter())
            .fold(Unitary2::IDENTITY, |acc, (&d, &axis)| waveplate(d, axis) * acc)
    }

    /// `W(d4, 45°) W(d3, 0°) W(d2, 45°) W(d1, 0°)`
    pub fn stack_unitary(&self, voltages: &[f64; 4]) -> Result<Unitary2, DeviceError> {
        Ok(Self::unitary_of_retardances(&self.retardances(voltages)?))
    }

    /// Voltages at the low-retardance end of every channel.
    pub fn rest_voltages(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.channels[i].v_max)
    }

    /// Finds voltages realizing `target` up to global phase.
    ///
    /// Plates 1-3 are solved by a ZXZ Euler decomposition (rotations about the
    /// S1, S2, S1 Poincaré axes) with plate 4 at its minimum retardance. If an
    /// angle falls outside a channel's window, plates 2-4 are solved with plate
    /// 1 at rest, and failing that the held plate is swept across its range.
    pub fn decompose_to_voltages(&self, target: &Unitary2) -> Result<[f64; 4], DeviceError> {
        let mut best_fidelity: f64 = 0.0;
        let mut closest = self.rest_voltages();
        let mut attempt = |solved: Solved, held: f64| -> Option<[f64; 4]> {
            for deltas in self.euler_candidates(target, solved, held) {
                let Some(volts) = self.voltages_for(&deltas) else {
                    continue;
                };
                let Ok(u) = self.stack_unitary(&volts) else {
                    continue;
                };
                let f = u.trace_fidelity(target);
                if f > best_fidelity {
                    best_fidelity = f;
                    closest = volts;
                }
                if f >= 1.0 - 1e-9 {
                    return Some(volts);
                }
            }
            None
        };

        if let Some(v) = attempt(Solved::First3, self.channels[3].delta_min()) {
            return Ok(v);
        }
        if let Some(v) = attempt(Solved::Last3, self.channels[0].delta_min()) {
            return Ok(v);
        }
        const SWEEP: usize = 64;
        for (solved, ch) in [(Solved::First3, 3), (Solved::Last3, 0)] {
            let (lo, hi) = (self.channels[ch].delta_min(), self.channels[ch].delta_max());
            for step in 1..=SWEEP {
                let held = lo + (hi - lo) * step as f64 / SWEEP as f64;
                if let Some(v) = attempt(solved, held) {
                    return Ok(v);
                }
            }
        }
        // Near the edge of the reachable set no exact Euler split fits the
        // windows; polish clamped candidates numerically.
        let mut starts: Vec<[f64; 4]> = Vec::new();
        for (solved, ch) in [(Solved::First3, 3), (Solved::Last3, 0)] {
            let (lo, hi) = (self.channels[ch].delta_min(), self.channels[ch].delta_max());
            for step in 0..=8 {
                let held = lo + (hi - lo) * step as f64 / 8.0;
                starts.extend(self.euler_candidates_clamped(target, solved, held));
            }
        }
        for code in 0..81u32 {
            starts.push(std::array::from_fn(|i| {
                let level = (code / 3u32.pow(i as u32)) % 3;
                let (lo, hi) = (self.channels[i].delta_min(), self.channels[i].delta_max());
                lo + (hi - lo) * (0.2 + 0.3 * level as f64)
            }));
        }
        for start in starts {
            let deltas = self.refine_retardances(target, start);
            if let Some(volts) = self.voltages_for(&deltas) {
                if let Ok(u) = self.stack_unitary(&volts) {
                    let f = u.trace_fidelity(target);
                    if f > best_fidelity {
                        best_fidelity = f;
                        closest = volts;
                    }
                    if f >= 1.0 - 1e-6 {
                        return Ok(volts);
                    }
                }
            }
        }
        Err(DeviceError::DecompositionFailed { best_fidelity, closest })
    }

    /// Euler solutions with each angle clamped into its window instead of
    /// rejected, used as starting points for refinement.
    fn euler_candidates_clamped(&self, target: &Unitary2, solved: Solved, held: f64) -> Vec<[f64; 4]> {
        let clamp = |ch: usize, d: f64| {
            let c = &self.channels[ch];
            let d = d.rem_euclid(TAU);
            let (lo, hi) = (c.delta_min(), c.delta_max());
            if d > hi {
                // nearer end across the wrap
                if d - hi < TAU - d + lo { hi } else { lo }
            } else {
                d.max(lo)
            }
        };
        match solved {
            Solved::First3 => {
                let rest = Unitary2::poincare_rotation([0.0, 1.0, 0.0], -held) * *target;
                zxz_angles(&rest)
                    .into_iter()
                    .map(|(a, b, c)| [clamp(0, c), clamp(1, b), clamp(2, a), held])
                    .collect()
            }
            Solved::Last3 => {
                let rest = *target * Unitary2::poincare_rotation([1.0, 0.0, 0.0], -held);
                let h = Unitary2::HADAMARD;
                zxz_angles(&(h * rest * h))
                    .into_iter()
                    .map(|(a, b, c)| [held, clamp(1, c), clamp(2, b), clamp(3, a)])
                    .collect()
            }
        }
    }

    /// Box-constrained Levenberg-Marquardt on the phase-aligned residual
    /// `U(deltas) - e^{i phi} target`, whose squared norm is `4 (1 - fidelity)`.
    fn refine_retardances(&self, target: &Unitary2, start: [f64; 4]) -> [f64; 4] {
        let lo: [f64; 4] = std::array::from_fn(|i| self.channels[i].delta_min());
        let hi: [f64; 4] = std::array::from_fn(|i| self.channels[i].delta_max());
        let residual = |d: &[f64; 4]| -> [f64; 8] {
            let u = Self::unitary_of_retardances(d);
            let overlap = (target.dagger() * u).trace();
            let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { num_complex::Complex64::new(1.0, 0.0) };
            let t = target.scale(phase);
            let mut r = [0.0; 8];
            for k in 0..4 {
                let diff = u.0[k / 2][k % 2] - t.0[k / 2][k % 2];
                r[2 * k] = diff.re;
                r[2 * k + 1] = diff.im;
            }
            r
        };
        let cost = |r: &[f64; 8]| r.iter().map(|x| x * x).sum::<f64>();
        let mut x = start;
        let mut r = residual(&x);
        let mut c = cost(&r);
        let mut lambda = 1e-3;
        for _ in 0..200 {
            if c < 1e-20 {
                break;
            }
            let h = 1e-7;
            let mut jac = [[0.0; 4]; 8];
            for j in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let (rp, rm) = (residual(&xp), residual(&xm));
                for i in 0..8 {
                    jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let mut jtj = [[0.0; 4]; 4];
            let mut jtr = [0.0; 4];
            for a in 0..4 {
                for b in 0..4 {
                    jtj[a][b] = (0..8).map(|i| jac[i][a] * jac[i][b]).sum();
                }
                jtr[a] = (0..8).map(|i| jac[i][a] * r[i]).sum();
            }
            let mut improved = false;
            for _ in 0..20 {
                let mut m = jtj;
                for (a, row) in m.iter_mut().enumerate() {
                    row[a] += lambda * (1.0 + jtj[a][a]);
                }
                let Some(step) = solve4(m, jtr.map(|v| -v)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: [f64; 4] = std::array::from_fn(|i| (x[i] + step[i]).clamp(lo[i], hi[i]));
                let rt = residual(&trial);
                let ct = cost(&rt);
                if ct < c {
                    x = trial;
                    r = rt;
                    c = ct;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        x
    }

    fn voltages_for(&self, deltas: &[f64; 4]) -> Option<[f64; 4]> {
        let mut out = [0.0; 4];
        for (i, ch) in self.channels.iter().enumerate() {
            out[i] = ch.voltage_for_retardance(deltas[i])?;
        }
        Some(out)
    }

    /// Retardance quadruples that reproduce `target` with one plate held at
    /// `held`, each angle already wrapped into its channel window.
    fn euler_candidates(&self, target: &Unitary2, solved: Solved, held: f64) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        match solved {
            Solved::First3 => {
                // Z(d3) X(d2) Z(d1) = X(held)^-1 * target
                let rest = Unitary2::poincare_rotation([0.0, 1.0, 0.0], -held) * *target;
                for (a, b, c) in zxz_angles(&rest) {
                    let ds = [
                        self.channels[0].wrap_into_range(c),
                        self.channels[1].wrap_into_range(b),
                        self.channels[2].wrap_into_range(a),
                    ];
                    if let [Some(d1), Some(d2), Some(d3)] = ds {
                        out.push([d1, d2, d3, held]);
                    }
                }
            }
            Solved::Last3 => {
                // X(d4) Z(d3) X(d2) = target * Z(held)^-1, conjugated by a
                // Hadamard so that X <-> Z and the ZXZ solver applies.
                let rest = *target * Unitary2::poincare_rotation([1.0, 0.0, 0.0], -held);
                let h = Unitary2::HADAMARD;
                for (a, b, c) in zxz_angles(&(h * rest * h)) {
                    let ds = [
                        self.channels[1].wrap_into_range(c),
                        self.channels[2].wrap_into_range(b),
                        self.channels[3].wrap_into_range(a),
                    ];
                    if let [Some(d2), Some(d3), Some(d4)] = ds {
                        out.push([held, d2, d3, d4]);
                    }
                }
            }
        }
        out
    }
}

/// Gaussian elimination with partial pivoting for a 4x4 system.
fn solve4(mut m: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

/// All `(alpha, beta, gamma)` with `Z(alpha) X(beta) Z(gamma) = u` up to phase,
/// where `Z(x) = exp(-i x/2 sigma_z)` and `X(x) = exp(-i x/2 sigma_x)`.
///
/// Returns both branches (`beta` and `-beta`); when `u` is diagonal or
/// anti-diagonal only a sum or difference is fixed and several splits are
/// offered.
fn zxz_angles(u: &Unitary2) -> Vec<(f64, f64, f64)> {
    let w = u.to_special();
    let w00 = w.0[0][0];
    let w10 = w.0[1][0];
    // Z(a)X(b)Z(c): w00 = cos(b/2) e^{-i(a+c)/2}, w10 = -i sin(b/2) e^{i(a-c)/2}
    let beta = 2.0 * w10.norm().atan2(w00.norm());
    let mut sums = Vec::new();
    const EPS: f64 = 1e-9;
    if w10.norm() < EPS {
        let sum = -2.0 * w00.arg();
        for k in 0..8 {
            let c = k as f64 * TAU / 8.0;
            sums.push((sum - c, c));
        }
    } else if w00.norm() < EPS {
        let diff = 2.0 * (num_complex::Complex64::i() * w10).arg();
        for k in 0..8 {
            let c = k as f64 * TAU / 8.0;
            sums.push((diff + c, c));
        }
    } else {
        let sum = -2.0 * w00.arg();
        let diff = 2.0 * (num_complex::Complex64::i() * w10).arg();
        sums.push(((sum + diff) / 2.0, (sum - diff) / 2.0));
    }
    let mut out = Vec::with_capacity(sums.len() * 2);
    for &(a, c) in &sums {
        out.push((a, beta, c));
        out.push((a + PI, -beta, c + PI));
    }
    out
}

/// The deployed fiber: a slowly drifting birefringent rotation with
/// occasional jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberChannel {
    pub rotation: Unitary2,
    pub loss_db: f64,
    pub length_km: f64,
    /// Random-walk scale, rad / sqrt(s).
    pub drift_sigma: f64,
    /// Jump events per second.
    pub jump_rate: f64,
    /// Scale of the half-normal jump angle, radians.
    pub jump_angle_scale: f64,
    /// Jumps applied so far.
    pub jumps: u64,
}

impl Default for FiberChannel {
    fn default() -> Self {
        FiberChannel {
            rotation: Unitary2::IDENTITY,
            loss_db: 7.0,
            length_km: 10.0,
            drift_sigma: 0.004,
            jump_rate: 1.0 / (12.0 * 3600.0),
            jump_angle_scale: 0.5,
            jumps: 0,
        }
    }
}

fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return v.map(|x| x / n);
        }
    }
}

impl FiberChannel {
    /// Power transmission implied by `loss_db`.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// Output Stokes vector for a fixed input polarization.
    pub fn probe_stokes(&self, probe: &JonesVector) -> StokesVector {
        jones_to_stokes(&self.rotation.apply(probe))
    }

    /// Left-multiplies the rotation by a Poincaré rotation.
    pub fn rotate(&mut self, axis: [f64; 3], angle: f64) {
        self.rotation =
            (Unitary2::poincare_rotation(axis, angle) * self.rotation).reorthonormalized();
    }

    /// Advances the fiber by `dt` seconds: one isotropic random-walk step of
    /// half-normal angle with scale `drift_sigma * sqrt(dt)`, plus a jump with
    /// probability `1 - exp(-jump_rate * dt)`.
    pub fn evolve<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> FiberChannel {
        let mut next = self.clone();
        if self.drift_sigma > 0.0 {
            let scale = self.drift_sigma * dt.sqrt();
            let eta = Normal::new(0.0, scale).map(|n| n.sample(rng).abs()).unwrap_or(0.0);
            next.rotate(random_axis(rng), eta);
        }
        if self.jump_rate > 0.0 {
            let p = 1.0 - (-self.jump_rate * dt).exp();
            if rng.random::<f64>() < p {
                let angle = Normal::new(0.0, self.jump_angle_scale)
                    .map(|n| n.sample(rng).abs())
                    .unwrap_or(0.0);
                next.rotate(random_axis(rng), angle);
                next.jumps += 1;
            }
        }
        next
    }
}

/// Free-function form of [`FiberChannel::evolve`].
pub fn evolve_fiber<R: Rng + ?Sized>(f: &FiberChannel, dt: f64, rng: &mut R) -> FiberChannel {
    f.evolve(dt, rng)
}
