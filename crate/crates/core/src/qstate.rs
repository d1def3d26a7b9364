//! Exact state algebra for up to three two-level particles.
//!
//! Basis convention, used everywhere in the crate: `|↑⟩` is index 0, `|↓⟩` is
//! index 1, and the leftmost particle (particle 0) is the most significant bit
//! of the amplitude index. For three particles the amplitude of
//! `|x₀ x₁ x₂⟩` lives at index `4·x₀ + 2·x₁ + x₂`.
//!
//! States that differ by a global phase are physically identical. Compare them
//! with [`PureState::equivalent`], never amplitude by amplitude.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Largest number of particles a [`PureState`] may describe.
pub const MAX_PARTICLES: usize = 3;
/// Largest number of particles a [`DensityMatrix`] may describe.
pub const MAX_MIXED_PARTICLES: usize = 2;

/// Normalization tolerance for pure states.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Hermiticity and trace tolerance for density matrices.
pub const DENSITY_TOLERANCE: f64 = 1e-12;
/// Most negative eigenvalue accepted in a density matrix.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Pairwise overlap above which a measurement basis is rejected.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;
/// Fidelity deficit below which two states count as the same physical state.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-10;

/// One complex amplitude.
pub type Amplitude = Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("amplitude vector of length {0} is not 2, 4 or 8")]
    BadLength(usize),
    #[error("all amplitudes are zero")]
    ZeroNorm,
    #[error("non-finite amplitude or matrix entry")]
    NonFinite,
    #[error("combined system of {0} particles exceeds the limit of {1}")]
    TooManyParticles(usize, usize),
    #[error("dimension mismatch: {left} vs {right} particles")]
    DimensionMismatch { left: usize, right: usize },
    #[error("particle index {index} invalid for a {num_particles}-particle state")]
    BadIndex { index: usize, num_particles: usize },
    #[error("measurement basis has {got} states, expected {expected}")]
    IncompleteBasis { expected: usize, got: usize },
    #[error("measurement basis states {0} and {1} are not orthonormal (overlap {2:e})")]
    NonOrthonormalBasis(usize, usize, f64),
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("matrix of size {0} is not a 2x2 or 4x4 square matrix")]
    BadMatrixShape(usize),
    #[error("outcome {0} has zero probability")]
    ZeroProbabilityOutcome(usize),
    #[error("random draw {0} is outside [0, 1)")]
    BadDraw(f64),
}

pub type Result<T, E = StateError> = std::result::Result<T, E>;

fn particles_for_len(len: usize) -> Option<usize> {
    match len {
        2 => Some(1),
        4 => Some(2),
        8 => Some(3),
        _ => None,
    }
}

pub(crate) fn check_draw(draw: f64) -> Result<()> {
    if (0.0..1.0).contains(&draw) {
        Ok(())
    } else {
        Err(StateError::BadDraw(draw))
    }
}

/// A normalized state vector of one to three two-level particles.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_particles: usize,
    amplitudes: Vec<Amplitude>,
}

impl PureState {
    /// Builds a state from raw amplitudes, dividing by their norm.
    pub fn new(amplitudes: Vec<Amplitude>) -> Result<Self> {
        let num_particles =
            particles_for_len(amplitudes.len()).ok_or(StateError::BadLength(amplitudes.len()))?;
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(StateError::NonFinite);
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(StateError::ZeroNorm);
        }
        let amplitudes = if (norm - 1.0).abs() > NORM_TOLERANCE / 2.0 {
            amplitudes.into_iter().map(|a| a / norm).collect()
        } else {
            amplitudes
        };
        Ok(PureState {
            num_particles,
            amplitudes,
        })
    }

    /// Single-particle state `a|↑⟩ + b|↓⟩`, normalized.
    pub fn qubit(a: Amplitude, b: Amplitude) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn up() -> Self {
        PureState {
            num_particles: 1,
            amplitudes: vec![ONE, ZERO],
        }
    }

    pub fn down() -> Self {
        PureState {
            num_particles: 1,
            amplitudes: vec![ZERO, ONE],
        }
    }

    pub fn num_particles(&self) -> usize {
        self.num_particles
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Kronecker product; `self` occupies the most significant positions.
    pub fn tensor(&self, right: &PureState) -> Result<PureState> {
        let total = self.num_particles + right.num_particles;
        if total > MAX_PARTICLES {
            return Err(StateError::TooManyParticles(total, MAX_PARTICLES));
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|l| right.amplitudes.iter().map(move |r| l * r))
            .collect();
        Ok(PureState {
            num_particles: total,
            amplitudes,
        })
    }

    /// `⟨self|other⟩`, conjugating `self`.
    pub fn inner_product(&self, other: &PureState) -> Result<Amplitude> {
        self.check_same_size(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(x, y)| x.conj() * y)
            .sum())
    }

    /// `|⟨self|other⟩|²`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// True when the two states agree up to a global phase.
    pub fn equivalent(&self, other: &PureState) -> bool {
        self.fidelity(other)
            .map(|f| f >= 1.0 - EQUIVALENCE_TOLERANCE)
            .unwrap_or(false)
    }

    fn check_same_size(&self, other: &PureState) -> Result<()> {
        if self.num_particles != other.num_particles {
            return Err(StateError::DimensionMismatch {
                left: self.num_particles,
                right: other.num_particles,
            });
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.num_particles {
            return Err(StateError::BadIndex {
                index,
                num_particles: self.num_particles,
            });
        }
        Ok(())
    }

    /// Applies `u` to one particle, leaving the others untouched.
    pub fn apply_unitary(&self, particle: usize, u: &Unitary2x2) -> Result<PureState> {
        self.check_index(particle)?;
        let stride = 1usize << (self.num_particles - 1 - particle);
        let mut amplitudes = self.amplitudes.clone();
        for i in 0..self.dim() {
            if i & stride != 0 {
                continue;
            }
            let [x0, x1] = u.apply([self.amplitudes[i], self.amplitudes[i | stride]]);
            amplitudes[i] = x0;
            amplitudes[i | stride] = x1;
        }
        Ok(PureState {
            num_particles: self.num_particles,
            amplitudes,
        })
    }

    /// Projective measurement of `particles` in `basis`, sampling the outcome
    /// with `draw` by walking the cumulative Born probabilities.
    ///
    /// Basis states are ordered with `particles[0]` as their most significant
    /// particle. The post-measurement state covers the unmeasured particles in
    /// increasing index order, and is `None` when every particle was measured.
    pub fn measure(
        &self,
        particles: &[usize],
        basis: &[PureState],
        draw: f64,
    ) -> Result<Measurement> {
        check_draw(draw)?;
        let residuals = self.residuals(particles, basis)?;
        let probabilities: Vec<f64> = residuals
            .iter()
            .map(|r| r.iter().map(|a| a.norm_sqr()).sum())
            .collect();
        let outcome = sample_index(&probabilities, draw);
        finish_measurement(outcome, probabilities[outcome], &residuals[outcome])
    }

    /// Same as [`measure`](Self::measure) with the outcome fixed in advance.
    pub fn project(
        &self,
        particles: &[usize],
        basis: &[PureState],
        outcome: usize,
    ) -> Result<Measurement> {
        let residuals = self.residuals(particles, basis)?;
        let Some(residual) = residuals.get(outcome) else {
            return Err(StateError::BadIndex {
                index: outcome,
                num_particles: basis.len(),
            });
        };
        let probability = residual.iter().map(|a| a.norm_sqr()).sum();
        finish_measurement(outcome, probability, residual)
    }

    /// Born probabilities of every basis outcome.
    pub fn outcome_probabilities(&self, particles: &[usize], basis: &[PureState]) -> Result<Vec<f64>> {
        Ok(self
            .residuals(particles, basis)?
            .iter()
            .map(|r| r.iter().map(|a| a.norm_sqr()).sum())
            .collect())
    }

    /// Unnormalized `(⟨bₖ| ⊗ I)|self⟩` for every basis state `bₖ`.
    fn residuals(&self, particles: &[usize], basis: &[PureState]) -> Result<Vec<Vec<Amplitude>>> {
        let n = self.num_particles;
        if particles.is_empty() {
            return Err(StateError::BadIndex {
                index: 0,
                num_particles: 0,
            });
        }
        for (k, &p) in particles.iter().enumerate() {
            self.check_index(p)?;
            if particles[..k].contains(&p) {
                return Err(StateError::BadIndex {
                    index: p,
                    num_particles: n,
                });
            }
        }
        let m = particles.len();
        check_basis(basis, m)?;

        let rest: Vec<usize> = (0..n).filter(|p| !particles.contains(p)).collect();
        let bit = |p: usize| 1usize << (n - 1 - p);
        let mut residuals = vec![vec![ZERO; 1 << rest.len()]; basis.len()];
        for (i, amp) in self.amplitudes.iter().enumerate() {
            if *amp == ZERO {
                continue;
            }
            let sub = particles
                .iter()
                .fold(0, |acc, &p| (acc << 1) | usize::from(i & bit(p) != 0));
            let rem = rest
                .iter()
                .fold(0, |acc, &p| (acc << 1) | usize::from(i & bit(p) != 0));
            for (residual, b) in residuals.iter_mut().zip(basis) {
                residual[rem] += b.amplitudes[sub].conj() * amp;
            }
        }
        Ok(residuals)
    }
}

fn check_basis(basis: &[PureState], m: usize) -> Result<()> {
    let expected = 1usize << m;
    if basis.len() != expected {
        return Err(StateError::IncompleteBasis {
            expected,
            got: basis.len(),
        });
    }
    for b in basis {
        if b.num_particles != m {
            return Err(StateError::DimensionMismatch {
                left: m,
                right: b.num_particles,
            });
        }
    }
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let overlap = basis[i].inner_product(&basis[j])?;
            let target = if i == j { ONE } else { ZERO };
            let deviation = (overlap - target).norm();
            if deviation >= ORTHONORMAL_TOLERANCE {
                return Err(StateError::NonOrthonormalBasis(i, j, deviation));
            }
        }
    }
    Ok(())
}

/// Picks the first index whose cumulative weight exceeds `draw`. Rounding can
/// leave `draw` above the final cumulative sum; the last non-zero weight wins.
pub(crate) fn sample_index(weights: &[f64], draw: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, w) in weights.iter().enumerate() {
        cumulative += w;
        if draw < cumulative {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

fn finish_measurement(outcome: usize, probability: f64, residual: &[Amplitude]) -> Result<Measurement> {
    if probability <= 0.0 {
        return Err(StateError::ZeroProbabilityOutcome(outcome));
    }
    let post_state = if residual.len() > 1 {
        Some(PureState::new(residual.to_vec())?)
    } else {
        None
    };
    Ok(Measurement {
        outcome,
        probability,
        post_state,
    })
}

/// Result of a projective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub outcome: usize,
    /// Born weight of the selected outcome.
    pub probability: f64,
    pub post_state: Option<PureState>,
}

/// The singlet `(|↑↓⟩ − |↓↑⟩)/√2`.
pub fn singlet() -> PureState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    PureState {
        num_particles: 2,
        amplitudes: vec![ZERO, Complex64::new(h, 0.0), Complex64::new(-h, 0.0), ZERO],
    }
}

/// A 2x2 unitary acting on one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2x2 {
    entries: [[Amplitude; 2]; 2],
}

impl Unitary2x2 {
    pub fn new(entries: [[Amplitude; 2]; 2]) -> Result<Self> {
        if entries.iter().flatten().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(StateError::NonFinite);
        }
        let u = Unitary2x2 { entries };
        let product = u.compose(&u.adjoint());
        for (r, row) in product.entries.iter().enumerate() {
            for (c, value) in row.iter().enumerate() {
                let target = if r == c { ONE } else { ZERO };
                if (value - target).norm() > NORM_TOLERANCE {
                    return Err(StateError::NotUnitary);
                }
            }
        }
        Ok(u)
    }

    pub fn from_real(entries: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(entries.map(|row| row.map(|x| Complex64::new(x, 0.0))))
    }

    pub fn identity() -> Self {
        Unitary2x2 {
            entries: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    pub fn entries(&self) -> &[[Amplitude; 2]; 2] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let e = &self.entries;
        Unitary2x2 {
            entries: [[e[0][0].conj(), e[1][0].conj()], [e[0][1].conj(), e[1][1].conj()]],
        }
    }

    /// Matrix product `self · rhs`.
    pub fn compose(&self, rhs: &Unitary2x2) -> Self {
        let (a, b) = (&self.entries, &rhs.entries);
        let mut entries = [[ZERO; 2]; 2];
        for (r, row) in entries.iter_mut().enumerate() {
            for (c, value) in row.iter_mut().enumerate() {
                *value = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Unitary2x2 { entries }
    }

    pub fn apply(&self, v: [Amplitude; 2]) -> [Amplitude; 2] {
        let e = &self.entries;
        [e[0][0] * v[0] + e[0][1] * v[1], e[1][0] * v[0] + e[1][1] * v[1]]
    }
}

impl fmt::Display for Unitary2x2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.entries;
        write!(f, "[[{}, {}], [{}, {}]]", e[0][0], e[0][1], e[1][0], e[1][1])
    }
}

/// Mixed state of one or two particles.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_particles: usize,
    entries: DMatrix<Amplitude>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<Amplitude>) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim {
            return Err(StateError::BadMatrixShape(dim.max(entries.ncols())));
        }
        let num_particles = match dim {
            2 => 1,
            4 => 2,
            _ => return Err(StateError::BadMatrixShape(dim)),
        };
        if entries.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(StateError::NonFinite);
        }
        for r in 0..dim {
            for c in r..dim {
                if (entries[(r, c)] - entries[(c, r)].conj()).norm() > DENSITY_TOLERANCE {
                    return Err(StateError::NotHermitian);
                }
            }
        }
        let trace = entries.trace();
        if (trace - ONE).norm() > DENSITY_TOLERANCE {
            return Err(StateError::BadTrace(trace.re));
        }
        let smallest = entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if smallest < EIGENVALUE_FLOOR {
            return Err(StateError::NotPositive(smallest));
        }
        Ok(DensityMatrix {
            num_particles,
            entries,
        })
    }

    /// Row-major construction from real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(StateError::BadMatrixShape(dim));
        }
        Self::new(DMatrix::from_fn(dim, dim, |r, c| Complex64::new(rows[r][c], 0.0)))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(state: &PureState) -> Result<Self> {
        if state.num_particles > MAX_MIXED_PARTICLES {
            return Err(StateError::TooManyParticles(state.num_particles, MAX_MIXED_PARTICLES));
        }
        let a = &state.amplitudes;
        Ok(DensityMatrix {
            num_particles: state.num_particles,
            entries: DMatrix::from_fn(a.len(), a.len(), |r, c| a[r] * a[c].conj()),
        })
    }

    /// `I / 2ⁿ`.
    pub fn maximally_mixed(num_particles: usize) -> Result<Self> {
        if num_particles == 0 || num_particles > MAX_MIXED_PARTICLES {
            return Err(StateError::TooManyParticles(num_particles, MAX_MIXED_PARTICLES));
        }
        let dim = 1usize << num_particles;
        Ok(DensityMatrix {
            num_particles,
            entries: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn tensor(&self, right: &DensityMatrix) -> Result<DensityMatrix> {
        let total = self.num_particles + right.num_particles;
        if total > MAX_MIXED_PARTICLES {
            return Err(StateError::TooManyParticles(total, MAX_MIXED_PARTICLES));
        }
        Ok(DensityMatrix {
            num_particles: total,
            entries: self.entries.kronecker(&right.entries),
        })
    }

    pub fn num_particles(&self) -> usize {
        self.num_particles
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Amplitude> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Amplitude {
        self.entries[(row, col)]
    }

    /// `⟨target|ρ|target⟩`, clamped to `[0, 1]`.
    pub fn fidelity(&self, target: &PureState) -> Result<f64> {
        if self.num_particles != target.num_particles {
            return Err(StateError::DimensionMismatch {
                left: self.num_particles,
                right: target.num_particles,
            });
        }
        let t = &target.amplitudes;
        let mut total = ZERO;
        for r in 0..t.len() {
            for c in 0..t.len() {
                total += t[r].conj() * self.entries[(r, c)] * t[c];
            }
        }
        Ok(total.re.clamp(0.0, 1.0))
    }

    /// Largest entry-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `U ρ U†` for a single-particle matrix.
    pub(crate) fn conjugate_by(&self, u: &Unitary2x2) -> Self {
        debug_assert_eq!(self.num_particles, 1);
        let e = u.entries();
        let m = nalgebra::Matrix2::new(e[0][0], e[0][1], e[1][0], e[1][1]);
        let rho = nalgebra::Matrix2::new(
            self.entries[(0, 0)],
            self.entries[(0, 1)],
            self.entries[(1, 0)],
            self.entries[(1, 1)],
        );
        let out = m * rho * m.adjoint();
        DensityMatrix {
            num_particles: 1,
            entries: DMatrix::from_fn(2, 2, |r, c| out[(r, c)]),
        }
    }

    /// Wraps a single-particle matrix known to be valid up to rounding.
    pub(crate) fn from_qubit_unchecked(m: [[Amplitude; 2]; 2]) -> Self {
        DensityMatrix {
            num_particles: 1,
            entries: DMatrix::from_fn(2, 2, |r, c| m[r][c]),
        }
    }
}

/// `|ψ⁻⟩⟨ψ⁻|` for the singlet, built once.
pub fn singlet_density() -> &'static DensityMatrix {
    static CELL: OnceLock<DensityMatrix> = OnceLock::new();
    CELL.get_or_init(|| DensityMatrix::from_pure(&singlet()).expect("two particles"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn make_pure_normalizes() {
        assert_eq!(PureState::new(real(&[1.0, 0.0])).unwrap(), PureState::up());
        let s = PureState::new(real(&[1.0, 1.0])).unwrap();
        for a in s.amplitudes() {
            assert!((a - c(H, 0.0)).norm() < 1e-15);
        }
        let s = PureState::new(real(&[0.0, 1.0, -1.0, 0.0])).unwrap();
        assert_eq!(s.num_particles(), 2);
        assert!(s.equivalent(&singlet()));
        for (x, y) in s.amplitudes().iter().zip(singlet().amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn make_pure_errors() {
        assert_eq!(PureState::new(real(&[0.0, 0.0])), Err(StateError::ZeroNorm));
        assert_eq!(PureState::new(real(&[1.0, 0.0, 0.0])), Err(StateError::BadLength(3)));
        assert_eq!(PureState::new(real(&[1.0; 16])), Err(StateError::BadLength(16)));
        assert_eq!(PureState::new(vec![]), Err(StateError::BadLength(0)));
        assert_eq!(
            PureState::new(vec![c(f64::NAN, 0.0), ONE]),
            Err(StateError::NonFinite)
        );
    }

    #[test]
    fn singlet_amplitudes() {
        let s = singlet();
        assert_eq!(s.amplitudes(), &[ZERO, c(H, 0.0), c(-H, 0.0), ZERO]);
        assert_eq!(s.fidelity(&s).unwrap(), 1.0);
        assert!((s.inner_product(&s).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn tensor_bookkeeping() {
        let up = PureState::up();
        let down = PureState::down();
        assert_eq!(up.tensor(&up).unwrap().amplitudes(), &real(&[1.0, 0.0, 0.0, 0.0])[..]);
        assert_eq!(down.tensor(&up).unwrap().amplitudes(), &real(&[0.0, 0.0, 1.0, 0.0])[..]);
        let f = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let joint = f.tensor(&singlet()).unwrap();
        assert_eq!(joint.num_particles(), 3);
        assert!((joint.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(
            joint.tensor(&up),
            Err(StateError::TooManyParticles(4, MAX_PARTICLES))
        );
    }

    #[test]
    fn inner_products_and_fidelity() {
        let up = PureState::up();
        let down = PureState::down();
        assert_eq!(up.inner_product(&up).unwrap(), ONE);
        assert_eq!(up.inner_product(&down).unwrap(), ZERO);
        assert_eq!(up.fidelity(&up).unwrap(), 1.0);
        assert_eq!(up.fidelity(&down).unwrap(), 0.0);
        let plus = PureState::new(real(&[H, H])).unwrap();
        let minus = PureState::new(real(&[H, -H])).unwrap();
        // ⟨+|−⟩ = (1/2)(1 − 1) = 0.
        assert!(plus.fidelity(&minus).unwrap() < 1e-30);
        assert_eq!(
            up.fidelity(&singlet()),
            Err(StateError::DimensionMismatch { left: 1, right: 2 })
        );
        // Conjugation sits on the left argument.
        let i_state = PureState::qubit(ZERO, c(0.0, 1.0)).unwrap();
        assert_eq!(down.inner_product(&i_state).unwrap(), c(0.0, 1.0));
        assert_eq!(i_state.inner_product(&down).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn global_phase_is_equivalence() {
        let f = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        let g = PureState::new(f.amplitudes().iter().map(|a| -a).collect()).unwrap();
        assert_ne!(f, g);
        assert!(f.equivalent(&g));
        assert!(!f.equivalent(&PureState::up()));
    }

    #[test]
    fn mixed_fidelity() {
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        let f = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert!((mixed.fidelity(&f).unwrap() - 0.5).abs() < 1e-15);
        let up = PureState::up();
        assert_eq!(DensityMatrix::from_pure(&up).unwrap().fidelity(&up).unwrap(), 1.0);
        let rho = DensityMatrix::from_real_rows(&[&[0.75, 0.0], &[0.0, 0.25]]).unwrap();
        assert_eq!(rho.fidelity(&up).unwrap(), 0.75);
        assert!(rho.fidelity(&singlet()).is_err());
    }

    #[test]
    fn density_validation() {
        assert_eq!(
            DensityMatrix::from_real_rows(&[&[0.5, 0.1], &[0.0, 0.5]]),
            Err(StateError::NotHermitian)
        );
        assert!(matches!(
            DensityMatrix::from_real_rows(&[&[0.5, 0.0], &[0.0, 0.6]]),
            Err(StateError::BadTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::from_real_rows(&[&[1.2, 0.0], &[0.0, -0.2]]),
            Err(StateError::NotPositive(_))
        ));
        assert!(matches!(
            DensityMatrix::from_real_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]),
            Err(StateError::BadMatrixShape(3))
        ));
        let pair = DensityMatrix::maximally_mixed(1)
            .unwrap()
            .tensor(&DensityMatrix::maximally_mixed(1).unwrap())
            .unwrap();
        assert!(pair.max_abs_diff(&DensityMatrix::maximally_mixed(2).unwrap()) < 1e-15);
        assert!(DensityMatrix::new(singlet_density().entries().clone()).is_ok());
    }

    #[test]
    fn measure_basis_state() {
        let up_up = PureState::up().tensor(&PureState::up()).unwrap();
        let z = [PureState::up(), PureState::down()];
        let m = up_up.measure(&[0], &z, 0.999).unwrap();
        assert_eq!(m.outcome, 0);
        assert_eq!(m.probability, 1.0);
        assert_eq!(m.post_state.unwrap(), PureState::up());
        assert_eq!(
            up_up.project(&[0], &z, 1),
            Err(StateError::ZeroProbabilityOutcome(1))
        );
    }

    #[test]
    fn measure_rejects_bad_bases() {
        let s = singlet();
        assert_eq!(
            s.measure(&[0], &[PureState::up()], 0.1),
            Err(StateError::IncompleteBasis { expected: 2, got: 1 })
        );
        let plus = PureState::new(real(&[H, H])).unwrap();
        assert!(matches!(
            s.measure(&[0], &[PureState::up(), plus], 0.1),
            Err(StateError::NonOrthonormalBasis(0, 1, _))
        ));
        let z = [PureState::up(), PureState::down()];
        assert!(matches!(s.measure(&[2], &z, 0.1), Err(StateError::BadIndex { .. })));
        assert!(matches!(s.measure(&[], &z, 0.1), Err(StateError::BadIndex { .. })));
        assert_eq!(s.measure(&[0], &z, 1.0), Err(StateError::BadDraw(1.0)));
    }

    #[test]
    fn measure_second_particle_of_singlet() {
        let z = [PureState::up(), PureState::down()];
        let m = singlet().measure(&[1], &z, 0.25).unwrap();
        assert_eq!(m.outcome, 0);
        assert!((m.probability - 0.5).abs() < 1e-15);
        // ↑ on particle 1 leaves −|↓⟩ on particle 0.
        assert!(m.post_state.unwrap().equivalent(&PureState::down()));
        let m = singlet().measure(&[1], &z, 0.75).unwrap();
        assert_eq!(m.outcome, 1);
        assert!(m.post_state.unwrap().equivalent(&PureState::up()));
    }

    #[test]
    fn measuring_everything_leaves_no_post_state() {
        let z2: Vec<PureState> = (0..4)
            .map(|k| {
                let mut v = vec![ZERO; 4];
                v[k] = ONE;
                PureState::new(v).unwrap()
            })
            .collect();
        let m = singlet().measure(&[0, 1], &z2, 0.6).unwrap();
        assert_eq!(m.outcome, 2);
        assert!(m.post_state.is_none());
    }

    #[test]
    fn unitaries() {
        let f = PureState::qubit(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert_eq!(f.apply_unitary(0, &Unitary2x2::identity()).unwrap(), f);
        let flip_sign = Unitary2x2::from_real([[-1.0, 0.0], [0.0, 1.0]]).unwrap();
        let minus_a = PureState::qubit(c(-0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert_eq!(minus_a.apply_unitary(0, &flip_sign).unwrap(), f);
        let swap = Unitary2x2::from_real([[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let swapped = PureState::qubit(c(0.0, 0.8), c(0.6, 0.0)).unwrap();
        assert_eq!(swapped.apply_unitary(0, &swap).unwrap(), f);
        assert!(matches!(f.apply_unitary(1, &swap), Err(StateError::BadIndex { .. })));
        assert_eq!(
            Unitary2x2::from_real([[1.0, 1.0], [0.0, 1.0]]),
            Err(StateError::NotUnitary)
        );
    }

    #[test]
    fn unitary_on_middle_particle() {
        let swap = Unitary2x2::from_real([[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let s = PureState::up()
            .tensor(&PureState::up())
            .unwrap()
            .tensor(&PureState::up())
            .unwrap();
        let flipped = s.apply_unitary(1, &swap).unwrap();
        // |↑↓↑⟩ is index 0b010.
        assert_eq!(flipped.amplitudes()[2], ONE);
    }

    fn arb_state(n: usize) -> impl Strategy<Value = PureState> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
            .prop_filter_map("zero norm", |v| {
                PureState::new(v.into_iter().map(|(r, i)| c(r, i)).collect()).ok()
            })
    }

    fn arb_unitary() -> impl Strategy<Value = Unitary2x2> {
        (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3).prop_map(|(t, a, b, g)| {
            let (s, co) = (t / 2.0).sin_cos();
            let e = |x: f64| Complex64::from_polar(1.0, x);
            Unitary2x2::new([
                [e(g) * e(a) * co, -(e(g) * e(b)) * s],
                [e(g) * e(-b) * s, e(g) * e(-a) * co],
            ])
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn construction_normalizes(s in arb_state(3)) {
            prop_assert!((s.norm_sqr() - 1.0).abs() < NORM_TOLERANCE);
        }

        #[test]
        fn tensor_stays_normalized(a in arb_state(1), b in arb_state(2)) {
            prop_assert!((a.tensor(&b).unwrap().norm_sqr() - 1.0).abs() < NORM_TOLERANCE);
        }

        #[test]
        fn unitaries_preserve_inner_products(
            x in arb_state(3), y in arb_state(3), u in arb_unitary(), p in 0usize..3
        ) {
            let before = x.inner_product(&y).unwrap();
            let ux = x.apply_unitary(p, &u).unwrap();
            let uy = y.apply_unitary(p, &u).unwrap();
            prop_assert!((ux.inner_product(&uy).unwrap() - before).norm() < 1e-12);
            prop_assert!((ux.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn outcome_probabilities_sum_to_one(s in arb_state(3), p in 0usize..3, draw in 0.0f64..1.0) {
            let z = [PureState::up(), PureState::down()];
            let total: f64 = s.outcome_probabilities(&[p], &z).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            let m = s.measure(&[p], &z, draw).unwrap();
            prop_assert!((m.post_state.unwrap().norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn maximally_mixed_fidelity_is_half(f in arb_state(1)) {
            let mixed = DensityMatrix::maximally_mixed(1).unwrap();
            prop_assert!((mixed.fidelity(&f).unwrap() - 0.5).abs() < 1e-15);
        }
    }
}
