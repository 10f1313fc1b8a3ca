//! Polarization math: Jones vectors, 2x2 unitaries, two-photon pair states and
//! Stokes parameters.
//!
//! Conventions used everywhere in this crate:
//!
//! * Jones vectors are `(a_H, a_V)`.
//! * A retarder with retardance `delta` and fast axis at `theta` from horizontal
//!   is `R(theta) * diag(1, e^{i delta}) * R(-theta)`, with `R` the real rotation
//!   matrix.
//! * Pair states are ordered `(HH, HV, VH, VV)`; photon A is the first factor.
//! * Equality between physical states or unitaries ignores global phase.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Single-photon polarization state `(a_H, a_V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector(pub [Complex64; 2]);

impl JonesVector {
    pub const H: JonesVector = JonesVector([ONE, ZERO]);
    pub const V: JonesVector = JonesVector([ZERO, ONE]);
    pub const D: JonesVector = JonesVector([
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    ]);
    pub const A: JonesVector = JonesVector([
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    ]);

    pub fn new(h: Complex64, v: Complex64) -> Self {
        JonesVector([h, v])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    pub fn stokes(&self) -> StokesVector {
        jones_to_stokes(self)
    }
}

/// Stokes parameters, with `s0` the total intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    /// Reduced vector `(s1, s2, s3)`.
    pub fn axis(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }

    pub fn degree_of_polarization(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt() / self.s0
    }

    /// Great-circle angle between two points on the Poincaré sphere.
    pub fn angle_to(&self, other: &StokesVector) -> f64 {
        let a = self.axis();
        let b = other.axis();
        let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0).acos()
    }
}

/// Stokes parameters of a normalized Jones vector:
/// `S1 = |a_H|^2 - |a_V|^2`, `S2 = 2 Re(a_H* a_V)`, `S3 = 2 Im(a_H* a_V)`.
pub fn jones_to_stokes(v: &JonesVector) -> StokesVector {
    let [h, vv] = v.0;
    let cross = h.conj() * vv;
    StokesVector {
        s0: h.norm_sqr() + vv.norm_sqr(),
        s1: h.norm_sqr() - vv.norm_sqr(),
        s2: 2.0 * cross.re,
        s3: 2.0 * cross.im,
    }
}

/// A 2x2 complex matrix expected to be unitary (row-major).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(pub [[Complex64; 2]; 2]);

impl Unitary2 {
    pub const IDENTITY: Unitary2 = Unitary2([[ONE, ZERO], [ZERO, ONE]]);
    pub const PAULI_X: Unitary2 = Unitary2([[ZERO, ONE], [ONE, ZERO]]);
    pub const PAULI_Y: Unitary2 = Unitary2([
        [ZERO, Complex64::new(0.0, -1.0)],
        [Complex64::new(0.0, 1.0), ZERO],
    ]);
    pub const PAULI_Z: Unitary2 = Unitary2([[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]]);
    /// Maps H/V amplitudes onto D/A amplitudes.
    pub const HADAMARD: Unitary2 = Unitary2([
        [
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        ],
        [
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(-FRAC_1_SQRT_2, 0.0),
        ],
    ]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Unitary2([[a, b], [c, d]])
    }

    /// Rotation `exp(-i (angle/2) n.sigma)` of the Poincaré sphere by `angle`
    /// about the axis `n` given in Stokes coordinates `(S1, S2, S3)`.
    ///
    /// The Stokes axes map to Pauli matrices as `S1 -> Z`, `S2 -> X`, `S3 -> Y`
    /// under the conventions of [`jones_to_stokes`]. `axis` need not be normalized.
    pub fn poincare_rotation(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s1, s2, s3) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let c = (angle / 2.0).cos();
        let s = (angle / 2.0).sin();
        // n.sigma with S1->Z, S2->X, S3->Y
        let i = Complex64::i();
        let a = Complex64::new(c, 0.0) - i * s * s1;
        let d = Complex64::new(c, 0.0) + i * s * s1;
        let b = -i * s * Complex64::new(s2, -s3);
        let cc = -i * s * Complex64::new(s2, s3);
        Unitary2([[a, b], [cc, d]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Unitary2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.0;
        Unitary2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let m = &self.0;
        JonesVector([
            m[0][0] * v.0[0] + m[0][1] * v.0[1],
            m[1][0] * v.0[0] + m[1][1] * v.0[1],
        ])
    }

    /// Largest entrywise modulus of `U U^dagger - I`.
    pub fn unitarity_error(&self) -> f64 {
        let p = *self * self.dagger();
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { ONE } else { ZERO };
                worst = worst.max((p.0[r][c] - expect).norm());
            }
        }
        worst
    }

    /// Phase-insensitive overlap `|tr(A^dagger B)| / 2`; equals 1 iff the two
    /// unitaries agree up to global phase.
    pub fn trace_fidelity(&self, other: &Unitary2) -> f64 {
        (self.dagger() * *other).trace().norm() / 2.0
    }

    /// Entrywise distance after removing the relative global phase.
    pub fn phase_distance(&self, other: &Unitary2) -> f64 {
        let overlap = (self.dagger() * *other).trace();
        if overlap.norm() == 0.0 {
            return f64::INFINITY;
        }
        let phase = overlap / overlap.norm();
        let aligned = self.scale(phase);
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((aligned.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// Representative in SU(2): divides out `sqrt(det)`.
    pub fn to_special(&self) -> Self {
        let phase = self.det().sqrt();
        self.scale(phase.inv())
    }

    /// Re-orthonormalizes the columns (Gram-Schmidt), removing accumulated
    /// rounding drift from long products.
    pub fn reorthonormalized(&self) -> Self {
        let m = &self.0;
        let mut c0 = [m[0][0], m[1][0]];
        let n0 = (c0[0].norm_sqr() + c0[1].norm_sqr()).sqrt();
        c0 = [c0[0] / n0, c0[1] / n0];
        let c1 = [m[0][1], m[1][1]];
        let proj = c0[0].conj() * c1[0] + c0[1].conj() * c1[1];
        let mut c1 = [c1[0] - proj * c0[0], c1[1] - proj * c0[1]];
        let n1 = (c1[0].norm_sqr() + c1[1].norm_sqr()).sqrt();
        c1 = [c1[0] / n1, c1[1] / n1];
        Unitary2([[c0[0], c1[0]], [c0[1], c1[1]]])
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Unitary2(out)
    }
}

/// Linear retarder with retardance `delta` and fast axis at `theta` (radians
/// from horizontal): `R(theta) diag(1, e^{i delta}) R(-theta)`.
pub fn waveplate(delta: f64, theta: f64) -> Unitary2 {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, delta);
    let (cc, ss, sc) = (c * c, s * s, s * c);
    Unitary2([
        [cc + e * ss, (ONE - e) * sc],
        [(ONE - e) * sc, e * cc + ss],
    ])
}

/// Haar-distributed element of U(2).
///
/// A uniformly random point on the 3-sphere gives an SU(2) element; an
/// independent uniform global phase extends it to U(2).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Unitary2 {
    let q = loop {
        let q: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            break q.map(|x| x / n);
        }
    };
    let alpha = Complex64::new(q[0], q[1]);
    let beta = Complex64::new(q[2], q[3]);
    let su2 = Unitary2([[alpha, -beta.conj()], [beta, alpha.conj()]]);
    let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    su2.scale(phase).reorthonormalized()
}

/// Polarization state of a photon pair, amplitudes ordered `(HH, HV, VH, VV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonState(pub [Complex64; 4]);

impl TwoPhotonState {
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude for photon A in `a` (0 = H, 1 = V) and photon B in `b`.
    pub fn amplitude(&self, a: usize, b: usize) -> Complex64 {
        self.0[2 * a + b]
    }

    pub fn inner(&self, other: &TwoPhotonState) -> Complex64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(x, y)| x.conj() * y)
            .sum()
    }

    /// `|<self|other>|`, the phase-insensitive overlap.
    pub fn overlap(&self, other: &TwoPhotonState) -> f64 {
        self.inner(other).norm()
    }
}

/// `(|HV> - |VH>) / sqrt(2)`
pub fn singlet() -> TwoPhotonState {
    TwoPhotonState([
        ZERO,
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
        ZERO,
    ])
}

/// `(U_A ⊗ U_B) |s>`
pub fn apply_local(u_a: &Unitary2, u_b: &Unitary2, s: &TwoPhotonState) -> TwoPhotonState {
    let mut out = [ZERO; 4];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = ZERO;
            for a2 in 0..2 {
                for b2 in 0..2 {
                    acc += u_a.0[a][a2] * u_b.0[b][b2] * s.0[2 * a2 + b2];
                }
            }
            out[2 * a + b] = acc;
        }
    }
    TwoPhotonState(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn singlet_amplitudes() {
        let s = singlet();
        assert_eq!(s.0[0], ZERO);
        assert_eq!(s.0[1].re, std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(s.0[2].re, -std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(s.0[3], ZERO);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_retardance_is_identity() {
        for theta in [0.0, 0.3, FRAC_PI_4, 2.0] {
            assert!(waveplate(0.0, theta).phase_distance(&Unitary2::IDENTITY) < 1e-15);
        }
    }

    #[test]
    fn half_wave_at_45_swaps_h_and_v() {
        let out = waveplate(PI, FRAC_PI_4).apply(&JonesVector::H);
        assert!((out.inner(&JonesVector::V).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_wave_at_45_makes_left_circular() {
        // Hand expansion of R(pi/4) diag(1, i) R(-pi/4) (1, 0):
        // R(-pi/4) H = (1, -1)/sqrt2, diag -> (1, -i)/sqrt2,
        // R(pi/4) -> ((1 + i)/2, (1 - i)/2).
        let expected = JonesVector::new(c(0.5, 0.5), c(0.5, -0.5));
        let out = waveplate(FRAC_PI_2, FRAC_PI_4).apply(&JonesVector::H);
        assert!((out.0[0] - expected.0[0]).norm() < 1e-12);
        assert!((out.0[1] - expected.0[1]).norm() < 1e-12);
        let st = out.stokes();
        for (got, want) in [st.s0, st.s1, st.s2, st.s3].iter().zip([1.0, 0.0, 0.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn stokes_of_basis_states() {
        let cases = [
            (JonesVector::H, [1.0, 1.0, 0.0, 0.0]),
            (JonesVector::D, [1.0, 0.0, 1.0, 0.0]),
            (
                JonesVector::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)),
                [1.0, 0.0, 0.0, 1.0],
            ),
        ];
        for (v, want) in cases {
            let s = jones_to_stokes(&v);
            for (got, w) in [s.s0, s.s1, s.s2, s.s3].iter().zip(want) {
                assert!((got - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn local_identity_and_pauli_x() {
        let s = singlet();
        let same = apply_local(&Unitary2::IDENTITY, &Unitary2::IDENTITY, &s);
        assert_eq!(same, s);

        let flipped = apply_local(&Unitary2::PAULI_X, &Unitary2::IDENTITY, &s);
        let want = [-FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
        for (got, w) in flipped.0.iter().zip(want) {
            assert!((got - c(w, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn equal_rotations_multiply_singlet_by_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let u = random_unitary(&mut rng);
            let out = apply_local(&u, &u, &singlet());
            let det = u.det();
            for (got, base) in out.0.iter().zip(singlet().0.iter()) {
                assert!((got - det * base).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn random_unitary_is_seeded_and_unitary() {
        let a = random_unitary(&mut ChaCha8Rng::seed_from_u64(5));
        let b = random_unitary(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let u = random_unitary(&mut rng);
            assert!(u.unitarity_error() < 1e-12);
            assert!((u.det().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_trace_moments() {
        // Weyl density of the SU(2) half-angle a on [0, pi]: (2/pi) sin^2 a,
        // integrated with the midpoint rule
        let steps = 200_000;
        let h = PI / steps as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..steps {
            let a = (i as f64 + 0.5) * h;
            let w = 2.0 / PI * a.sin().powi(2) * h;
            m1 += w * (2.0 * a.cos()).abs();
            m2 += w * (2.0 * a.cos()).powi(2);
        }
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let t = random_unitary(&mut rng).trace().norm();
            s1 += t;
            s2 += t * t;
        }
        let (e1, e2) = (s1 / n as f64, s2 / n as f64);
        let se = ((m2 - m1 * m1) / n as f64).sqrt();
        assert!((e1 - m1).abs() < 4.0 * se, "{e1} vs {m1}");
        assert!((e2 - m2).abs() < 0.02, "{e2} vs {m2}");
    }

    #[test]
    fn poincare_rotation_matches_waveplates() {
        // S1 axis <-> waveplate at 0, S2 axis <-> waveplate at 45 deg.
        for delta in [0.2, 1.0, 3.0, 5.5] {
            let r1 = Unitary2::poincare_rotation([1.0, 0.0, 0.0], delta);
            assert!(r1.trace_fidelity(&waveplate(delta, 0.0)) > 1.0 - 1e-14);
            let r2 = Unitary2::poincare_rotation([0.0, 1.0, 0.0], delta);
            assert!(r2.trace_fidelity(&waveplate(delta, FRAC_PI_4)) > 1.0 - 1e-14);
        }
        // Rotating H by pi/2 about S2 lands on the S3 pole.
        let v = Unitary2::poincare_rotation([0.0, 1.0, 0.0], FRAC_PI_2).apply(&JonesVector::H);
        assert!((v.stokes().s3.abs() - 1.0).abs() < 1e-12);
        // Rotating D by pi/2 about S3 lands on -S1 (right-hand rule: S2 -> -S1).
        let v = Unitary2::poincare_rotation([0.0, 0.0, 1.0], FRAC_PI_2).apply(&JonesVector::D);
        assert!((v.stokes().s1 + 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn waveplate_period_in_retardance(delta in -10.0f64..10.0, theta in -4.0f64..4.0) {
            let a = waveplate(delta, theta);
            let b = waveplate(delta + TAU, theta);
            prop_assert!(a.phase_distance(&b) < 1e-12);
        }

        #[test]
        fn waveplate_composition_on_shared_axis(
            d1 in -6.0f64..6.0, d2 in -6.0f64..6.0, theta in -4.0f64..4.0,
        ) {
            let prod = waveplate(d1, theta) * waveplate(d2, theta);
            prop_assert!(prod.phase_distance(&waveplate(d1 + d2, theta)) < 1e-12);
        }

        #[test]
        fn waveplate_is_unitary(delta in -10.0f64..10.0, theta in -4.0f64..4.0) {
            prop_assert!(waveplate(delta, theta).unitarity_error() < 1e-12);
        }

        #[test]
        fn local_rotations_preserve_norm(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_unitary(&mut rng);
            let b = random_unitary(&mut rng);
            let s = apply_local(&a, &b, &singlet());
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let pure = jones_to_stokes(&a.apply(&JonesVector::H));
            prop_assert!((pure.degree_of_polarization() - 1.0).abs() < 1e-12);
        }
    }
}
