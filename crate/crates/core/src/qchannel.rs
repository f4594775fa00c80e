//! Single-qubit states, unitaries and channels.
//!
//! Channels are stored as 4x4 superoperators acting on column-stacked
//! density matrices: `vec(rho)[r + 2 c] = rho[(r, c)]`. With this
//! convention the unitary channel `rho -> U rho U^dagger` has superoperator
//! `conj(U) ⊗ U`, and the Choi matrix is obtained by reshuffling the
//! superoperator (see [`Channel::choi`]).
//!
//! Every channel built through the public constructors is checked for
//! complete positivity and trace preservation.

use nalgebra::{Matrix2, Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Tolerance on `tr(rho) = 1` and hermiticity.
pub const STATE_TOL: f64 = 1e-12;
/// Tolerance on `U U^dagger = I`.
pub const UNITARY_TOL: f64 = 1e-12;
/// Tolerance on trace preservation and Choi positivity.
pub const CPTP_TOL: f64 = 1e-10;

pub fn pauli_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2<C64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

fn max_abs2(m: &Matrix2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_abs4(m: &Matrix4<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

fn vec_of(rho: &Matrix2<C64>) -> Vector4<C64> {
    Vector4::new(rho[(0, 0)], rho[(1, 0)], rho[(0, 1)], rho[(1, 1)])
}

fn unvec(v: &Vector4<C64>) -> Matrix2<C64> {
    Matrix2::new(v[0], v[2], v[1], v[3])
}

/// Density matrix of a single qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    rho: Matrix2<C64>,
}

impl QubitState {
    /// Validates trace, hermiticity and the eigenvalue range.
    pub fn new(rho: Matrix2<C64>) -> Result<Self> {
        let tr = rho.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::invalid(format!("density matrix trace {tr} is not 1")));
        }
        if max_abs2(&(rho - rho.adjoint())) > STATE_TOL {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let eig = SymmetricEigen::new(rho).eigenvalues;
        if eig.iter().any(|&e| !(-1e-10..=1.0 + 1e-10).contains(&e)) {
            return Err(Error::invalid(format!(
                "density matrix eigenvalues {eig:?} outside [0, 1]"
            )));
        }
        Ok(Self { rho })
    }

    pub fn ground() -> Self {
        Self {
            rho: Matrix2::new(ONE, ZERO, ZERO, ZERO),
        }
    }

    pub fn excited() -> Self {
        Self {
            rho: Matrix2::new(ZERO, ZERO, ZERO, ONE),
        }
    }

    /// Pure state from an (unnormalized) ket.
    pub fn pure(a: C64, b: C64) -> Result<Self> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("ket must be non-zero and finite"));
        }
        let (a, b) = (a / norm, b / norm);
        Ok(Self {
            rho: Matrix2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj()),
        })
    }

    pub fn rho(&self) -> &Matrix2<C64> {
        &self.rho
    }

    /// `<0|rho|0>`, clamped into [0, 1] against rounding.
    pub fn ground_population(&self) -> f64 {
        self.rho[(0, 0)].re.clamp(0.0, 1.0)
    }

    /// Bloch vector `(<X>, <Y>, <Z>)`.
    pub fn bloch(&self) -> [f64; 3] {
        let r = &self.rho;
        [2.0 * r[(1, 0)].re, 2.0 * r[(1, 0)].im, (r[(0, 0)] - r[(1, 1)]).re]
    }
}

/// Free-function form of [`QubitState::ground_population`].
pub fn ground_population(state: &QubitState) -> f64 {
    state.ground_population()
}

/// A 2x2 unitary matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unitary2 {
    u: Matrix2<C64>,
}

impl Unitary2 {
    pub fn new(u: Matrix2<C64>) -> Result<Self> {
        let dev = max_abs2(&(u * u.adjoint() - Matrix2::identity()));
        if dev > UNITARY_TOL {
            return Err(Error::invalid(format!(
                "matrix is not unitary (|UU^† - I| = {dev:.3e})"
            )));
        }
        Ok(Self { u })
    }

    /// Skips the check; for products of matrices already known to be unitary.
    pub fn identity() -> Self {
        Self { u: Matrix2::identity() }
    }

    /// `exp(-i angle/2 n.sigma)` for a unit axis `n`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("rotation axis has norm {norm}, expected 1")));
        }
        Ok(Self::rotation_unchecked(axis, angle))
    }

    pub(crate) fn rotation_unchecked(axis: [f64; 3], angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        let n_sigma = pauli_x() * C64::from(axis[0]) + pauli_y() * C64::from(axis[1]) + pauli_z() * C64::from(axis[2]);
        Self {
            u: Matrix2::identity() * C64::from(c) - n_sigma * (I * s),
        }
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.u
    }

    pub fn dagger(&self) -> Self {
        Self { u: self.u.adjoint() }
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn mul(&self, other: &Unitary2) -> Self {
        Self { u: self.u * other.u }
    }

    pub fn trace(&self) -> C64 {
        self.u.trace()
    }

    pub fn determinant(&self) -> C64 {
        self.u.determinant()
    }

    /// Equality up to a global phase, measured as `1 - |tr(A^† B)|/2`.
    pub fn equals_up_to_phase(&self, other: &Unitary2, tol: f64) -> bool {
        1.0 - (self.u.adjoint() * other.u).trace().norm() / 2.0 <= tol
    }

    pub fn power(&self, n: u32) -> Self {
        let mut out = Matrix2::identity();
        for _ in 0..n {
            out *= self.u;
        }
        Self { u: out }
    }
}

/// The unitary error `exp(-i (epsilon/2) axis.sigma)`: a systematic extra
/// rotation by `epsilon` about `axis`.
pub fn overrotation_unitary(epsilon: f64, axis: [f64; 3]) -> Result<Unitary2> {
    Unitary2::rotation(axis, epsilon)
}

/// Average gate fidelity `F` together with the depolarizing parameter
/// `alpha = 2F - 1`. `alpha` is always derived from `F`, never stored
/// independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPair {
    avg_fidelity: f64,
    depol_param: f64,
}

impl FidelityPair {
    pub fn from_fidelity(f: f64) -> Self {
        Self {
            avg_fidelity: f,
            depol_param: 2.0 * f - 1.0,
        }
    }

    pub fn avg_fidelity(&self) -> f64 {
        self.avg_fidelity
    }

    pub fn alpha(&self) -> f64 {
        self.depol_param
    }

    /// Average gate infidelity `1 - F`.
    pub fn error(&self) -> f64 {
        1.0 - self.avg_fidelity
    }
}

/// `F = (|tr u|^2 + 2) / 6`.
pub fn avg_fidelity_vs_identity(u: &Unitary2) -> FidelityPair {
    FidelityPair::from_fidelity((u.trace().norm_sqr() + 2.0) / 6.0)
}

/// Average gate fidelity of `actual` with respect to the ideal `target`,
/// through the process fidelity `F_pro = tr(S_target^† S_actual) / 4` and
/// `F = (2 F_pro + 1) / 3`.
pub fn avg_gate_fidelity(actual: &Channel, target: &Unitary2) -> FidelityPair {
    let s_target = Channel::unitary(target).superop;
    let f_pro = (s_target.adjoint() * actual.superop).trace().re / 4.0;
    FidelityPair::from_fidelity((2.0 * f_pro + 1.0) / 3.0)
}

/// A completely positive, trace-preserving map on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    superop: Matrix4<C64>,
}

impl Channel {
    /// Wraps a superoperator after checking CPTP at [`CPTP_TOL`].
    pub fn new(superop: Matrix4<C64>) -> Result<Self> {
        let ch = Self { superop };
        let tp = ch.trace_preservation_error();
        if tp > CPTP_TOL {
            return Err(Error::invalid(format!("map is not trace preserving (error {tp:.3e})")));
        }
        let min_eig = ch.min_choi_eigenvalue();
        if min_eig < -CPTP_TOL {
            return Err(Error::invalid(format!(
                "map is not completely positive (min Choi eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(ch)
    }

    pub fn identity() -> Self {
        Self {
            superop: Matrix4::identity(),
        }
    }

    pub fn unitary(u: &Unitary2) -> Self {
        Self {
            superop: kron2(&u.u.map(|z| z.conj()), &u.u),
        }
    }

    /// Channel `rho -> sum_k K rho K^dagger`; checked for CPTP.
    pub fn from_kraus(kraus: &[Matrix2<C64>]) -> Result<Self> {
        let superop = kraus
            .iter()
            .fold(Matrix4::zeros(), |acc, k| acc + kron2(&k.map(|z| z.conj()), k));
        Self::new(superop)
    }

    /// `rho -> p rho + (1 - p) I/2`; CPTP for `p` in [-1/3, 1].
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(-1.0 / 3.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("depolarizing parameter {p} outside [-1/3, 1]")));
        }
        let mut s = Matrix4::identity() * C64::from(p);
        // (1 - p) tr(rho) I/2, with tr(rho) = v[0] + v[3].
        let q = C64::from((1.0 - p) / 2.0);
        for r in [0, 3] {
            for c in [0, 3] {
                s[(r, c)] += q;
            }
        }
        Ok(Self { superop: s })
    }

    /// Amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!("damping probability {gamma} outside [0, 1]")));
        }
        let mut s = Matrix4::zeros();
        let coh = C64::from((1.0 - gamma).sqrt());
        s[(0, 0)] = ONE;
        s[(0, 3)] = C64::from(gamma);
        s[(3, 3)] = C64::from(1.0 - gamma);
        s[(1, 1)] = coh;
        s[(2, 2)] = coh;
        Ok(Self { superop: s })
    }

    /// Pure dephasing that multiplies the coherences by `coherence` in [0, 1].
    pub fn dephasing(coherence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&coherence) {
            return Err(Error::invalid(format!("coherence factor {coherence} outside [0, 1]")));
        }
        let mut s = Matrix4::identity();
        s[(1, 1)] = C64::from(coherence);
        s[(2, 2)] = C64::from(coherence);
        Ok(Self { superop: s })
    }

    /// Free evolution for `duration` under energy relaxation `t1` and total
    /// dephasing `t2`: amplitude damping at rate `1/t1` followed by pure
    /// dephasing at rate `1/t2 - 1/(2 t1)`.
    pub fn decoherence(duration: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(t1 > 0.0 && t2 > 0.0) {
            return Err(Error::invalid("T1 and T2 must be positive"));
        }
        if t2 > 2.0 * t1 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("T2 = {t2:e} s exceeds 2 T1 = {:e} s", 2.0 * t1)));
        }
        if !(duration >= 0.0) {
            return Err(Error::invalid("duration must be non-negative"));
        }
        let gamma_phi = (1.0 / t2 - 0.5 / t1).max(0.0);
        let damping = Self::amplitude_damping(-(-duration / t1).exp_m1())?;
        let dephasing = Self::dephasing((-duration * gamma_phi).exp())?;
        Ok(damping.then(&dephasing))
    }

    pub fn superop(&self) -> &Matrix4<C64> {
        &self.superop
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Channel) -> Channel {
        Channel {
            superop: next.superop * self.superop,
        }
    }

    /// `n`-fold repetition.
    pub fn power(&self, n: u32) -> Channel {
        let mut out = Matrix4::identity();
        for _ in 0..n {
            out = self.superop * out;
        }
        Channel { superop: out }
    }

    pub fn apply(&self, state: &QubitState) -> QubitState {
        QubitState {
            rho: unvec(&(self.superop * vec_of(&state.rho))),
        }
    }

    /// Affine Bloch-vector map `r -> m r + t`.
    pub fn bloch_map(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let paulis = [pauli_x(), pauli_y(), pauli_z()];
        let half = Matrix2::identity() * C64::from(0.5);
        let image = |rho: &Matrix2<C64>| unvec(&(self.superop * vec_of(rho)));
        let coords = |rho: &Matrix2<C64>| Vector3::from_fn(|i, _| (paulis[i] * rho).trace().re);
        let t = coords(&image(&half));
        let m = Matrix3::from_fn(|i, j| {
            let out = image(&(paulis[j] * C64::from(0.5)));
            (paulis[i] * out).trace().re
        });
        (m, t)
    }

    /// Choi matrix `J = sum_ij |i><j| ⊗ E(|i><j|)`, trace 2.
    pub fn choi(&self) -> Matrix4<C64> {
        // J[(2i + a, 2j + b)] = E(|i><j|)[(a, b)] = S[(a + 2b, i + 2j)].
        Matrix4::from_fn(|r, c| {
            let (i, a) = (r / 2, r % 2);
            let (j, b) = (c / 2, c % 2);
            self.superop[(a + 2 * b, i + 2 * j)]
        })
    }

    /// Eigenvalues of the Choi matrix, ascending.
    pub fn choi_eigenvalues(&self) -> [f64; 4] {
        let j = self.choi();
        let j = (j + j.adjoint()) * C64::from(0.5);
        let mut e: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        [e[0], e[1], e[2], e[3]]
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        self.choi_eigenvalues()[0]
    }

    /// Largest deviation of the dual map applied to the identity from the
    /// identity, i.e. `max |vec(I)^T S - vec(I)^T|`.
    pub fn trace_preservation_error(&self) -> f64 {
        (0..4)
            .map(|c| {
                let got = self.superop[(0, c)] + self.superop[(3, c)];
                let want = if c == 0 || c == 3 { ONE } else { ZERO };
                (got - want).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        self.trace_preservation_error() <= tol && self.min_choi_eigenvalue() >= -tol
    }

    /// Largest entry-wise difference of the superoperators.
    pub fn distance(&self, other: &Channel) -> f64 {
        max_abs4(&(self.superop - other.superop))
    }

    /// Second-largest Choi eigenvalue divided by the trace; zero for a
    /// unitary channel.
    pub fn nonunitarity(&self) -> f64 {
        let e = self.choi_eigenvalues();
        e[2].max(0.0) / 2.0
    }
}

/// `a` followed by `b`.
pub fn compose(a: &Channel, b: &Channel) -> Channel {
    a.then(b)
}

pub fn apply(channel: &Channel, state: &QubitState) -> QubitState {
    channel.apply(state)
}

pub fn unitary_channel(u: &Unitary2) -> Channel {
    Channel::unitary(u)
}

pub fn decoherence_channel(duration: f64, t1: f64, t2: f64) -> Result<Channel> {
    Channel::decoherence(duration, t1, t2)
}

/// Column-stacked |0><0|, the starting point of every benchmarking sequence.
pub(crate) fn ground_vec() -> Vector4<C64> {
    Vector4::new(ONE, ZERO, ZERO, ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const X: [f64; 3] = [1.0, 0.0, 0.0];
    const Z: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn zero_overrotation_is_identity() {
        let u = overrotation_unitary(0.0, Z).unwrap();
        assert!(max_abs2(&(u.matrix() - Matrix2::identity())) < 1e-15);
    }

    #[test]
    fn full_x_rotation_is_minus_i_sigma_x() {
        let u = overrotation_unitary(PI, X).unwrap();
        assert!(max_abs2(&(u.matrix() - pauli_x() * (-I))) < 1e-15);
        assert_abs_diff_eq!(u.determinant().norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn small_overrotation_trace() {
        let u = overrotation_unitary(PI / 64.0, X).unwrap();
        assert_abs_diff_eq!(u.trace().re, 2.0 * (PI / 128.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(u.trace().re, 1.99940, epsilon = 1e-5);
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(matches!(
            overrotation_unitary(0.1, [1.0, 1.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn fidelity_vs_identity_cases() {
        let id = avg_fidelity_vs_identity(&Unitary2::identity());
        assert_eq!(id.avg_fidelity(), 1.0);
        assert_eq!(id.alpha(), 1.0);

        let z = Unitary2::new(pauli_z()).unwrap();
        let f = avg_fidelity_vs_identity(&z);
        assert_abs_diff_eq!(f.avg_fidelity(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.alpha(), -1.0 / 3.0, epsilon = 1e-15);

        for eps in [0.01, PI / 64.0, 0.7] {
            let f = avg_fidelity_vs_identity(&overrotation_unitary(eps, X).unwrap());
            assert_abs_diff_eq!(f.alpha(), (2.0 * eps.cos() + 1.0) / 3.0, epsilon = 1e-14);
            assert_eq!(f.alpha(), 2.0 * f.avg_fidelity() - 1.0);
        }
    }

    #[test]
    fn channel_fidelity_reduces_to_unitary_case() {
        let u = overrotation_unitary(PI / 64.0, X).unwrap();
        let a = avg_gate_fidelity(&Channel::unitary(&u), &Unitary2::identity());
        let b = avg_fidelity_vs_identity(&u);
        assert_abs_diff_eq!(a.avg_fidelity(), b.avg_fidelity(), epsilon = 1e-12);
        let f = avg_gate_fidelity(&Channel::identity(), &Unitary2::identity());
        assert_abs_diff_eq!(f.avg_fidelity(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn decoherence_edge_cases() {
        let ch = Channel::decoherence(0.0, 45e-6, 53e-6).unwrap();
        assert!(ch.distance(&Channel::identity()) < 1e-15);

        // T2 = 2 T1: pure amplitude damping.
        let t = 1e-6;
        let ch = Channel::decoherence(t, 10e-6, 20e-6).unwrap();
        let ad = Channel::amplitude_damping(-(-t / 10e-6f64).exp_m1()).unwrap();
        assert!(ch.distance(&ad) < 1e-15);

        assert!(matches!(
            Channel::decoherence(t, 10e-6, 25e-6),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Channel::decoherence(16.7e-9, 45e-6, 53e-6).unwrap().is_cptp(CPTP_TOL));
    }

    #[test]
    fn decoherence_coherence_decay_rate() {
        let (t, t1, t2) = (3e-6, 45e-6, 53e-6);
        let plus = QubitState::pure(ONE, ONE).unwrap();
        let out = Channel::decoherence(t, t1, t2).unwrap().apply(&plus);
        assert_abs_diff_eq!(out.rho()[(0, 1)].re, 0.5 * (-t / t2).exp(), epsilon = 1e-15);
        let out = Channel::decoherence(t, t1, t2).unwrap().apply(&QubitState::excited());
        assert_abs_diff_eq!(out.rho()[(1, 1)].re, (-t / t1).exp(), epsilon = 1e-15);
    }

    #[test]
    fn composition_and_application() {
        let x = Channel::unitary(&Unitary2::new(pauli_x()).unwrap());
        let out = compose(&Channel::identity(), &x).apply(&QubitState::ground());
        assert_abs_diff_eq!(out.rho()[(1, 1)].re, 1.0, epsilon = 1e-15);
        assert_eq!(ground_population(&QubitState::ground()), 1.0);

        let u = Unitary2::rotation([0.6, 0.0, 0.8], 1.234).unwrap();
        let pair = compose(&Channel::unitary(&u), &Channel::unitary(&u.dagger()));
        assert!(pair.distance(&Channel::identity()) < 1e-12);
    }

    #[test]
    fn choi_of_identity_is_rank_one() {
        let e = Channel::identity().choi_eigenvalues();
        assert_abs_diff_eq!(e[3], 2.0, epsilon = 1e-12);
        assert!(e[..3].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn non_cp_map_is_rejected() {
        // Transpose map: positive but not completely positive.
        let mut s = Matrix4::zeros();
        s[(0, 0)] = ONE;
        s[(3, 3)] = ONE;
        s[(1, 2)] = ONE;
        s[(2, 1)] = ONE;
        assert!(Channel::new(s).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(QubitState::new(Matrix2::new(ONE, ZERO, ZERO, ONE)).is_err());
        assert!(QubitState::new(Matrix2::new(ONE, ONE, ZERO, ZERO)).is_err());
        let rho = Matrix2::new(C64::from(1.5), ZERO, ZERO, C64::from(-0.5));
        assert!(QubitState::new(rho).is_err());
    }
}
