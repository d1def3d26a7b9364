//! Input qubits and per-trial random streams.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::qstate::PureState;

/// Where each trial's input qubit comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum QubitSampler {
    /// Uniform over the Bloch sphere.
    Haar,
    /// The same qubit every trial.
    Fixed(PureState),
}

impl QubitSampler {
    /// Draws the qubit for one trial. Always consumes two uniforms so the
    /// rest of the trial sees the same stream whichever mode is active.
    pub fn sample(&self, draws: [f64; 2]) -> PureState {
        match self {
            QubitSampler::Haar => haar_random_qubit(draws),
            QubitSampler::Fixed(state) => state.clone(),
        }
    }
}

/// Maps two uniforms in `[0, 1)` to `cos(θ/2)|↑⟩ + e^{iφ} sin(θ/2)|↓⟩` with
/// `cos θ` uniform on `[−1, 1]` and `φ` uniform on `[0, 2π)`.
pub fn haar_random_qubit(draws: [f64; 2]) -> PureState {
    let cos_theta = 1.0 - 2.0 * draws[0];
    let a = ((1.0 + cos_theta) / 2.0).max(0.0).sqrt();
    let b = ((1.0 - cos_theta) / 2.0).max(0.0).sqrt();
    let phi = 2.0 * PI * draws[1];
    PureState::qubit(Complex64::new(a, 0.0), Complex64::from_polar(b, phi))
        .expect("unit vector")
}

/// Independent stream for one trial: the run seed keys the generator and the
/// trial index selects the stream, so a trial's draws never depend on which
/// worker runs it.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}
