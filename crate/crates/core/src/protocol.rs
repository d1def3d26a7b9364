//! Ideal single-qubit teleportation: Bell measurement on particles 0 and 1,
//! a two-bit message, and Bob's correction on particle 2.
//!
//! With the singlet shared on particles 1 and 2, projecting particles 0 and 1
//! of `(a|↑⟩ + b|↓⟩) ⊗ |Ψ⁻⟩` onto each Bell state leaves particle 2 in one of
//! four conditional states, each with weight 1/4:
//!
//! | outcome | Bob's state     | correction            |
//! |---------|-----------------|-----------------------|
//! | `Ψ⁻`    | `−a|↑⟩ − b|↓⟩`  | identity              |
//! | `Ψ⁺`    | `−a|↑⟩ + b|↓⟩`  | `[[−1, 0], [0, 1]]`   |
//! | `Φ⁻`    | `b|↑⟩ + a|↓⟩`   | `[[0, 1], [1, 0]]`    |
//! | `Φ⁺`    | `−b|↑⟩ + a|↓⟩`  | `[[0, 1], [−1, 0]]`   |
//!
//! Every correction returns `(a, b)` up to a global phase.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::qstate::{
    check_draw, sample_index, Amplitude, DensityMatrix, PureState, Result, StateError,
    Unitary2x2,
};

/// Particles Alice measures in the three-particle register.
pub const ALICE_PARTICLES: [usize; 2] = [0, 1];

/// Result of Alice's Bell measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellOutcome {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellOutcome {
    /// All outcomes in basis order.
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PsiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PhiPlus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BellOutcome::PsiMinus => "psi_minus",
            BellOutcome::PsiPlus => "psi_plus",
            BellOutcome::PhiMinus => "phi_minus",
            BellOutcome::PhiPlus => "phi_plus",
        }
    }

    /// The two-particle Bell state for this outcome.
    pub fn state(self) -> &'static PureState {
        &bell_basis_ref()[self.index()]
    }

    pub fn message(self) -> ClassicalMessage {
        ClassicalMessage(self.index() as u8)
    }

    /// Bob's uncorrected state after Alice observes this outcome, for input
    /// qubit `f`.
    pub fn conditional_state(self, f: &PureState) -> Result<PureState> {
        let [a, b] = qubit_amplitudes(f)?;
        let amps = match self {
            BellOutcome::PsiMinus => [-a, -b],
            BellOutcome::PsiPlus => [-a, b],
            BellOutcome::PhiMinus => [b, a],
            BellOutcome::PhiPlus => [-b, a],
        };
        PureState::new(amps.to_vec())
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellOutcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown Bell outcome `{s}`"))
    }
}

/// Alice's two classical bits: `Ψ⁻ = 00`, `Ψ⁺ = 01`, `Φ⁻ = 10`, `Φ⁺ = 11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassicalMessage(u8);

impl ClassicalMessage {
    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn outcome(self) -> BellOutcome {
        BellOutcome::ALL[usize::from(self.0)]
    }
}

impl TryFrom<u8> for ClassicalMessage {
    type Error = u8;

    fn try_from(bits: u8) -> std::result::Result<Self, u8> {
        if bits < 4 {
            Ok(ClassicalMessage(bits))
        } else {
            Err(bits)
        }
    }
}

impl From<BellOutcome> for ClassicalMessage {
    fn from(outcome: BellOutcome) -> Self {
        outcome.message()
    }
}

impl From<ClassicalMessage> for BellOutcome {
    fn from(message: ClassicalMessage) -> Self {
        message.outcome()
    }
}

impl fmt::Display for ClassicalMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.0)
    }
}

fn bell_basis_ref() -> &'static [PureState; 4] {
    static CELL: OnceLock<[PureState; 4]> = OnceLock::new();
    CELL.get_or_init(|| {
        let real = |v: [f64; 4]| {
            PureState::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .expect("nonzero")
        };
        [
            real([0.0, 1.0, -1.0, 0.0]),
            real([0.0, 1.0, 1.0, 0.0]),
            real([1.0, 0.0, 0.0, -1.0]),
            real([1.0, 0.0, 0.0, 1.0]),
        ]
    })
}

/// `(Ψ⁻, Ψ⁺, Φ⁻, Φ⁺)`.
pub fn bell_basis() -> [PureState; 4] {
    bell_basis_ref().clone()
}

/// Bob's recovery unitary for each outcome.
pub fn correction_for(outcome: BellOutcome) -> Unitary2x2 {
    let m = match outcome {
        BellOutcome::PsiMinus => [[1.0, 0.0], [0.0, 1.0]],
        BellOutcome::PsiPlus => [[-1.0, 0.0], [0.0, 1.0]],
        BellOutcome::PhiMinus => [[0.0, 1.0], [1.0, 0.0]],
        BellOutcome::PhiPlus => [[0.0, 1.0], [-1.0, 0.0]],
    };
    Unitary2x2::from_real(m).expect("real orthogonal")
}

fn qubit_amplitudes(f: &PureState) -> Result<[Amplitude; 2]> {
    if f.num_particles() != 1 {
        return Err(StateError::DimensionMismatch {
            left: 1,
            right: f.num_particles(),
        });
    }
    Ok([f.amplitudes()[0], f.amplitudes()[1]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeleportResult {
    pub outcome: BellOutcome,
    /// Bob's state after correction.
    pub bob_state: PureState,
    pub outcome_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedTeleportResult {
    pub outcome: BellOutcome,
    /// Bob's reduced state after correction.
    pub bob_state: DensityMatrix,
    pub outcome_probability: f64,
}

/// Teleports `f` through a perfect singlet, sampling Alice's outcome with
/// `draw`.
pub fn teleport_ideal(f: &PureState, draw: f64) -> Result<TeleportResult> {
    check_draw(draw)?;
    let joint = ideal_register(f)?;
    let m = joint.measure(&ALICE_PARTICLES, bell_basis_ref(), draw)?;
    finish_ideal(m.outcome, m.probability, m.post_state)
}

/// [`teleport_ideal`] with Alice's outcome fixed.
pub fn teleport_forced(f: &PureState, outcome: BellOutcome) -> Result<TeleportResult> {
    let joint = ideal_register(f)?;
    let m = joint.project(&ALICE_PARTICLES, bell_basis_ref(), outcome.index())?;
    finish_ideal(m.outcome, m.probability, m.post_state)
}

fn ideal_register(f: &PureState) -> Result<PureState> {
    qubit_amplitudes(f)?;
    f.tensor(&crate::qstate::singlet())
}

fn finish_ideal(index: usize, probability: f64, post: Option<PureState>) -> Result<TeleportResult> {
    let outcome = BellOutcome::ALL[index];
    let residual = post.expect("particle 2 is unmeasured");
    Ok(TeleportResult {
        outcome,
        bob_state: residual.apply_unitary(0, &correction_for(outcome))?,
        outcome_probability: probability,
    })
}

/// `wₖ[x] = Σ_y conj(βₖ[y x]) f[y]`: the Bell projection with Alice's qubit
/// contracted out, indexed by the state of particle 1.
fn contracted_bell(f: &[Amplitude; 2]) -> [[Amplitude; 2]; 4] {
    let basis = bell_basis_ref();
    let mut w = [[Complex64::new(0.0, 0.0); 2]; 4];
    for (k, beta) in basis.iter().enumerate() {
        let beta = beta.amplitudes();
        for (x, slot) in w[k].iter_mut().enumerate() {
            *slot = beta[x].conj() * f[0] + beta[2 + x].conj() * f[1];
        }
    }
    w
}

/// Unnormalized Bob states `σₖ = (⟨βₖ| ⊗ I)(|f⟩⟨f| ⊗ ρ)(|βₖ⟩ ⊗ I)`.
fn resource_branches(f: &PureState, resource: &DensityMatrix) -> Result<[[[Amplitude; 2]; 2]; 4]> {
    let amps = qubit_amplitudes(f)?;
    if resource.num_particles() != 2 {
        return Err(StateError::DimensionMismatch {
            left: 2,
            right: resource.num_particles(),
        });
    }
    let w = contracted_bell(&amps);
    let zero = Complex64::new(0.0, 0.0);
    let mut sigma = [[[zero; 2]; 2]; 4];
    for (k, s) in sigma.iter_mut().enumerate() {
        for (j, row) in s.iter_mut().enumerate() {
            for (jp, value) in row.iter_mut().enumerate() {
                for x in 0..2 {
                    for xp in 0..2 {
                        *value += w[k][x] * w[k][xp].conj() * resource.entry(2 * x + j, 2 * xp + jp);
                    }
                }
            }
        }
    }
    Ok(sigma)
}

fn branch_probabilities(sigma: &[[[Amplitude; 2]; 2]; 4]) -> [f64; 4] {
    sigma.map(|s| (s[0][0] + s[1][1]).re.max(0.0))
}

/// Teleports `f` through an arbitrary two-particle resource shared on
/// particles 1 and 2, sampling Alice's outcome with `draw`.
pub fn teleport_with_resource(
    f: &PureState,
    resource: &DensityMatrix,
    draw: f64,
) -> Result<MixedTeleportResult> {
    check_draw(draw)?;
    let sigma = resource_branches(f, resource)?;
    let probabilities = branch_probabilities(&sigma);
    let k = sample_index(&probabilities, draw);
    finish_mixed(k, probabilities[k], &sigma[k])
}

/// [`teleport_with_resource`] with Alice's outcome fixed.
pub fn teleport_with_resource_forced(
    f: &PureState,
    resource: &DensityMatrix,
    outcome: BellOutcome,
) -> Result<MixedTeleportResult> {
    let sigma = resource_branches(f, resource)?;
    let k = outcome.index();
    finish_mixed(k, branch_probabilities(&sigma)[k], &sigma[k])
}

fn finish_mixed(k: usize, probability: f64, sigma: &[[Amplitude; 2]; 2]) -> Result<MixedTeleportResult> {
    if probability <= 0.0 {
        return Err(StateError::ZeroProbabilityOutcome(k));
    }
    let outcome = BellOutcome::ALL[k];
    let normalized = sigma.map(|row| row.map(|z| z / probability));
    let bob_state =
        DensityMatrix::from_qubit_unchecked(normalized).conjugate_by(&correction_for(outcome));
    Ok(MixedTeleportResult {
        outcome,
        bob_state,
        outcome_probability: probability,
    })
}

/// Bell outcome probabilities when Alice holds `f` and a lone particle in
/// state `alice_particle`, with nothing entangled at Bob's end.
pub fn alice_only_probabilities(f: &PureState, alice_particle: &DensityMatrix) -> Result<[f64; 4]> {
    let amps = qubit_amplitudes(f)?;
    if alice_particle.num_particles() != 1 {
        return Err(StateError::DimensionMismatch {
            left: 1,
            right: alice_particle.num_particles(),
        });
    }
    let w = contracted_bell(&amps);
    Ok(w.map(|wk| {
        let mut p = Complex64::new(0.0, 0.0);
        for x in 0..2 {
            for xp in 0..2 {
                p += wk[x] * wk[xp].conj() * alice_particle.entry(x, xp);
            }
        }
        p.re.max(0.0)
    }))
}

/// Alice's Bell measurement when Bob received nothing. Returns the sampled
/// outcome and its probability.
pub fn measure_alice_only(
    f: &PureState,
    alice_particle: &DensityMatrix,
    draw: f64,
) -> Result<(BellOutcome, f64)> {
    check_draw(draw)?;
    let p = alice_only_probabilities(f, alice_particle)?;
    let k = sample_index(&p, draw);
    Ok((BellOutcome::ALL[k], p[k]))
}
