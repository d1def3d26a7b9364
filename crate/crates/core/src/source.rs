//! EPR sources as classical mixtures of particle-number channels.
//!
//! A physical source never emits a clean two-particle state. Each emission
//! lands in one of several channels (the bare pair, the pair plus extra
//! radiation, a different final state altogether), and each channel fixes what
//! Alice and Bob actually receive. A [`SourceModel`] is a validated table of
//! such channels.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qstate::{check_draw, sample_index, singlet_density, DensityMatrix, StateError};

/// Fine-structure constant used by [`suppression_factor`].
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035999;

/// Widest deviation of the raw probability sum from 1 that is renormalized
/// rather than rejected.
pub const RENORMALIZATION_BAND: f64 = 1e-3;

/// Raw sums closer to 1 than this are kept as they are.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Default share of the four-photon cascade channel in which Bob receives an
/// uncorrelated photon instead of nothing.
pub const DEFAULT_UNCORRELATED_FRACTION: f64 = 0.1;

/// Largest `|c₂|²` accepted by [`cascade_source`].
pub const MAX_CASCADE_C2: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("source model has no channels")]
    EmptyModel,
    #[error("channel `{label}` has negative probability {probability}")]
    NegativeProbability { label: String, probability: f64 },
    #[error("channel `{label}` has probability {probability} outside [0, 1]")]
    ProbabilityOutOfRange { label: String, probability: f64 },
    #[error("ProbabilitySumError: channel probabilities sum to {0}, more than 1e-3 away from 1")]
    ProbabilitySum(f64),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("ParseError: {0}")]
    Parse(String),
    #[error(transparent)]
    State(#[from] StateError),
}

/// What a channel hands to Alice (particle 1) and Bob (particle 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryKind {
    /// The singlet, one particle each.
    EntangledPair,
    /// A maximally mixed particle for Alice; nothing for Bob.
    AliceOnly,
    /// A maximally mixed particle for Bob; nothing for Alice.
    BobOnly,
    /// Neither party receives a usable particle.
    None,
    /// One maximally mixed particle each, with no correlation.
    UncorrelatedPair,
}

impl DeliveryKind {
    pub const ALL: [DeliveryKind; 5] = [
        DeliveryKind::EntangledPair,
        DeliveryKind::AliceOnly,
        DeliveryKind::BobOnly,
        DeliveryKind::None,
        DeliveryKind::UncorrelatedPair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeliveryKind::EntangledPair => "entangled_pair",
            DeliveryKind::AliceOnly => "alice_only",
            DeliveryKind::BobOnly => "bob_only",
            DeliveryKind::None => "none",
            DeliveryKind::UncorrelatedPair => "uncorrelated_pair",
        }
    }

    pub fn alice_receives(self) -> bool {
        matches!(
            self,
            DeliveryKind::EntangledPair | DeliveryKind::AliceOnly | DeliveryKind::UncorrelatedPair
        )
    }

    pub fn bob_receives(self) -> bool {
        matches!(
            self,
            DeliveryKind::EntangledPair | DeliveryKind::BobOnly | DeliveryKind::UncorrelatedPair
        )
    }

    pub fn is_coincidence(self) -> bool {
        self.alice_receives() && self.bob_receives()
    }
}

impl fmt::Display for DeliveryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of a source table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceChannel {
    pub label: String,
    pub probability: f64,
    pub delivery: DeliveryKind,
}

impl SourceChannel {
    pub fn new(label: impl Into<String>, probability: f64, delivery: DeliveryKind) -> Self {
        SourceChannel {
            label: label.into(),
            probability,
            delivery,
        }
    }
}

/// Unvalidated source table, as read from or written to a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTable {
    pub name: String,
    pub channels: Vec<SourceChannel>,
}

/// A validated source: probabilities in `[0, 1]` summing to 1.
///
/// The raw table is kept alongside so that serialization reproduces the input
/// document exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    name: String,
    channels: Vec<SourceChannel>,
    raw_probabilities: Vec<f64>,
    raw_sum: f64,
    renormalized: bool,
}

impl SourceModel {
    pub fn new(name: impl Into<String>, channels: Vec<SourceChannel>) -> Result<Self, SourceError> {
        validate(SourceTable {
            name: name.into(),
            channels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Channels with renormalized probabilities.
    pub fn channels(&self) -> &[SourceChannel] {
        &self.channels
    }

    pub fn raw_sum(&self) -> f64 {
        self.raw_sum
    }

    pub fn raw_probabilities(&self) -> &[f64] {
        &self.raw_probabilities
    }

    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    /// Total probability of channels with the given delivery.
    pub fn probability_of(&self, delivery: DeliveryKind) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.delivery == delivery)
            .map(|c| c.probability)
            .sum()
    }

    /// Index of the channel selected by `draw` on the cumulative table.
    pub fn channel_index(&self, draw: f64) -> Result<usize, SourceError> {
        check_draw(draw)?;
        let weights: Vec<f64> = self.channels.iter().map(|c| c.probability).collect();
        Ok(sample_index(&weights, draw))
    }

    /// The raw table this model was validated from.
    pub fn to_table(&self) -> SourceTable {
        SourceTable {
            name: self.name.clone(),
            channels: self
                .channels
                .iter()
                .zip(&self.raw_probabilities)
                .map(|(c, &p)| SourceChannel::new(c.label.clone(), p, c.delivery))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_table()).expect("plain data serializes")
    }
}

/// Checks a raw table, renormalizing sums within 1e-3 of 1.
pub fn validate(table: SourceTable) -> Result<SourceModel, SourceError> {
    if table.channels.is_empty() {
        return Err(SourceError::EmptyModel);
    }
    for c in &table.channels {
        if c.probability < 0.0 {
            return Err(SourceError::NegativeProbability {
                label: c.label.clone(),
                probability: c.probability,
            });
        }
        if c.probability.is_nan() || c.probability > 1.0 {
            return Err(SourceError::ProbabilityOutOfRange {
                label: c.label.clone(),
                probability: c.probability,
            });
        }
    }
    let raw_probabilities: Vec<f64> = table.channels.iter().map(|c| c.probability).collect();
    let raw_sum: f64 = raw_probabilities.iter().sum();
    let deviation = (raw_sum - 1.0).abs();
    if deviation > RENORMALIZATION_BAND {
        return Err(SourceError::ProbabilitySum(raw_sum));
    }
    let renormalized = deviation > SUM_TOLERANCE;
    let mut channels = table.channels;
    if renormalized {
        for c in &mut channels {
            c.probability /= raw_sum;
        }
    }
    Ok(SourceModel {
        name: table.name,
        channels,
        raw_probabilities,
        raw_sum,
        renormalized,
    })
}

/// Parses and validates a source-table JSON document.
pub fn load_source(document: &str) -> Result<SourceModel, SourceError> {
    let table: SourceTable =
        serde_json::from_str(document).map_err(|e| SourceError::Parse(e.to_string()))?;
    validate(table)
}

/// A perfect singlet source.
pub fn ideal_source() -> SourceModel {
    SourceModel::new(
        "ideal",
        vec![SourceChannel::new("pair", 1.0, DeliveryKind::EntangledPair)],
    )
    .expect("valid table")
}

/// Neutral-pion decay. Probabilities are the squared amplitudes
/// 0.9940, 0.1095, 0.0056 and 0.00027 of the γγ, γe⁺e⁻, e⁺e⁻e⁺e⁻ and e⁺e⁻
/// final states; their sum exceeds 1 by about 5.8e-5 and is renormalized.
pub fn pion_source() -> SourceModel {
    validate(pion_table()).expect("valid table")
}

/// The raw pion table before renormalization.
pub fn pion_table() -> SourceTable {
    let sq = |x: f64| x * x;
    SourceTable {
        name: "pion".into(),
        channels: vec![
            SourceChannel::new("gg", sq(0.9940), DeliveryKind::EntangledPair),
            SourceChannel::new("ge+e-", sq(0.1095), DeliveryKind::AliceOnly),
            SourceChannel::new("e+e-e+e-", sq(0.0056), DeliveryKind::None),
            SourceChannel::new("e+e-", sq(0.00027), DeliveryKind::None),
        ],
    }
}

/// Atomic two-photon cascade. The four-photon channel (probability
/// `c2_squared`) splits into Alice-only emissions and, with share
/// `uncorrelated_fraction`, an uncorrelated photon at each end. Zero-weight
/// sub-channels are omitted.
pub fn cascade_source(c2_squared: f64, uncorrelated_fraction: f64) -> Result<SourceModel, SourceError> {
    if !(0.0..=MAX_CASCADE_C2).contains(&c2_squared) {
        return Err(SourceError::OutOfRange {
            name: "c2_squared",
            value: c2_squared,
            range: "[0, 0.01]",
        });
    }
    if !(0.0..=1.0).contains(&uncorrelated_fraction) {
        return Err(SourceError::OutOfRange {
            name: "uncorrelated_fraction",
            value: uncorrelated_fraction,
            range: "[0, 1]",
        });
    }
    let mut channels = vec![SourceChannel::new(
        "gg",
        1.0 - c2_squared,
        DeliveryKind::EntangledPair,
    )];
    let (uncorrelated, lost) = split_exact(c2_squared, uncorrelated_fraction);
    if lost > 0.0 {
        channels.push(SourceChannel::new("gggg", lost, DeliveryKind::AliceOnly));
    }
    if uncorrelated > 0.0 {
        channels.push(SourceChannel::new(
            "gggg_uncorrelated",
            uncorrelated,
            DeliveryKind::UncorrelatedPair,
        ));
    }
    SourceModel::new(
        format!("cascade:c2={c2_squared:e},u={uncorrelated_fraction}"),
        channels,
    )
}

/// Splits `total` into `(share * total, rest)` with the two parts summing
/// back to `total` exactly in floating point.
fn split_exact(total: f64, share: f64) -> (f64, f64) {
    let (small_share, swapped) = if share <= 0.5 { (share, false) } else { (1.0 - share, true) };
    let large = total - small_share * total;
    let small = total - large;
    if swapped {
        (large, small)
    } else {
        (small, large)
    }
}

/// `α^order` with the physical fine-structure constant.
pub fn suppression_factor(order: u32) -> Result<f64, SourceError> {
    suppression_factor_with(order, FINE_STRUCTURE)
}

/// `alpha^order`; order zero is rejected.
pub fn suppression_factor_with(order: u32, alpha: f64) -> Result<f64, SourceError> {
    if order == 0 {
        return Err(SourceError::OutOfRange {
            name: "order",
            value: 0.0,
            range: "[1, ∞)",
        });
    }
    Ok(alpha.powi(order as i32))
}

/// Resolves `ideal`, `pion` and `cascade:c2=<v>[,u=<v>]`. Returns `None` for
/// anything else, which callers treat as a file path.
pub fn builtin(reference: &str) -> Option<Result<SourceModel, SourceError>> {
    match reference {
        "ideal" => return Some(Ok(ideal_source())),
        "pion" => return Some(Ok(pion_source())),
        _ => {}
    }
    let params = reference.strip_prefix("cascade:")?;
    Some(parse_cascade(params))
}

/// Names accepted by [`builtin`], for listings.
pub const BUILTIN_NAMES: [&str; 3] = ["ideal", "pion", "cascade:c2=<v>,u=<v>"];

fn parse_cascade(params: &str) -> Result<SourceModel, SourceError> {
    let mut c2 = None;
    let mut u = DEFAULT_UNCORRELATED_FRACTION;
    for part in params.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| SourceError::Parse(format!("expected key=value in `{part}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| SourceError::Parse(format!("bad number `{value}` for `{key}`")))?;
        match key.trim() {
            "c2" => c2 = Some(value),
            "u" => u = value,
            other => return Err(SourceError::Parse(format!("unknown cascade parameter `{other}`"))),
        }
    }
    let c2 = c2.ok_or_else(|| SourceError::Parse("cascade source needs c2=<value>".into()))?;
    cascade_source(c2, u)
}

/// Particles handed out by one emission.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionOutcome<'m> {
    pub channel_index: usize,
    pub channel_label: &'m str,
    pub delivery: DeliveryKind,
    /// Alice's particle when Bob receives nothing.
    pub alice_particle: Option<DensityMatrix>,
    /// Present iff both parties receive particles.
    pub joint_resource: Option<DensityMatrix>,
}

/// Draws a channel and materializes the particles it delivers.
pub fn sample_emission(model: &SourceModel, draw: f64) -> Result<EmissionOutcome<'_>, SourceError> {
    let channel_index = model.channel_index(draw)?;
    let channel = &model.channels[channel_index];
    let half = || DensityMatrix::maximally_mixed(1).expect("one particle");
    let (alice_particle, joint_resource) = match channel.delivery {
        DeliveryKind::EntangledPair => (None, Some(singlet_density().clone())),
        DeliveryKind::UncorrelatedPair => (None, Some(half().tensor(&half())?)),
        DeliveryKind::AliceOnly => (Some(half()), None),
        DeliveryKind::BobOnly | DeliveryKind::None => (None, None),
    };
    Ok(EmissionOutcome {
        channel_index,
        channel_label: &channel.label,
        delivery: channel.delivery,
        alice_particle,
        joint_resource,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pion_table_values() {
        let raw = pion_table();
        assert_eq!(raw.channels[0].probability, 0.988036);
        assert!((raw.channels[1].probability - 0.01199025).abs() < 1e-17);
        assert!((raw.channels[2].probability - 3.136e-5).abs() < 1e-19);
        assert!((raw.channels[3].probability - 7.29e-8).abs() < 1e-22);
        let model = pion_source();
        assert!(model.renormalized());
        assert!((model.raw_sum() - 1.0000577).abs() < 1e-7);
        let total: f64 = model.channels().iter().map(|c| c.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let lost = 1.0 - model.probability_of(DeliveryKind::EntangledPair);
        assert!((lost - 0.012).abs() < 5e-5, "{lost}");
    }

    #[test]
    fn cascade_channels() {
        let m = cascade_source(1e-5, 0.0).unwrap();
        assert_eq!(m.channels().len(), 2);
        assert_eq!(m.channels()[0].probability, 1.0 - 1e-5);
        assert_eq!(m.channels()[1].probability, 1e-5);
        assert_eq!(m.channels()[1].delivery, DeliveryKind::AliceOnly);

        let m = cascade_source(0.0, 0.7).unwrap();
        assert_eq!(m.channels().len(), 1);
        assert_eq!(m.channels()[0].probability, 1.0);
        assert!(!m.renormalized());

        let m = cascade_source(1e-4, 0.1).unwrap();
        let p: Vec<f64> = m.channels().iter().map(|c| c.probability).collect();
        assert!((p[0] - 0.9999).abs() < 1e-15);
        assert!((p[1] - 9e-5).abs() < 1e-18);
        assert!((p[2] - 1e-5).abs() < 1e-18);
        assert_eq!(m.name(), "cascade:c2=1e-4,u=0.1");
    }

    #[test]
    fn cascade_rejects_out_of_range() {
        assert!(matches!(
            cascade_source(0.02, 0.1),
            Err(SourceError::OutOfRange { name: "c2_squared", .. })
        ));
        assert!(matches!(
            cascade_source(1e-4, 1.5),
            Err(SourceError::OutOfRange { name: "uncorrelated_fraction", .. })
        ));
        assert!(cascade_source(-1e-9, 0.0).is_err());
        assert!(cascade_source(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn suppression() {
        let a = suppression_factor(1).unwrap();
        assert!((a - 7.297e-3).abs() < 1e-6);
        let a2 = suppression_factor(2).unwrap();
        assert!((a2 - 5.325e-5).abs() < 1e-8);
        assert!(suppression_factor(0).is_err());
        for order in 1..6 {
            assert!(suppression_factor(order + 1).unwrap() < suppression_factor(order).unwrap());
        }
    }

    #[test]
    fn validation() {
        let short = SourceModel::new(
            "short",
            vec![
                SourceChannel::new("a", 0.5, DeliveryKind::EntangledPair),
                SourceChannel::new("b", 0.4, DeliveryKind::None),
            ],
        );
        assert!(matches!(short, Err(SourceError::ProbabilitySum(s)) if (s - 0.9).abs() < 1e-15));
        assert_eq!(SourceModel::new("empty", vec![]), Err(SourceError::EmptyModel));
        let negative = SourceModel::new(
            "neg",
            vec![
                SourceChannel::new("a", 1.1, DeliveryKind::EntangledPair),
                SourceChannel::new("b", -0.1, DeliveryKind::None),
            ],
        );
        assert!(matches!(negative, Err(SourceError::ProbabilityOutOfRange { .. })));
        let negative = SourceModel::new(
            "neg",
            vec![SourceChannel::new("b", -0.1, DeliveryKind::None)],
        );
        assert!(matches!(negative, Err(SourceError::NegativeProbability { .. })));
        let single = SourceModel::new(
            "one",
            vec![SourceChannel::new("a", 1.0, DeliveryKind::EntangledPair)],
        )
        .unwrap();
        assert!(!single.renormalized());
        assert_eq!(single.channels()[0].probability, 1.0);
    }

    #[test]
    fn emission_sampling() {
        let ideal = ideal_source();
        for draw in [0.0, 0.5, 0.999_999] {
            let e = sample_emission(&ideal, draw).unwrap();
            assert_eq!(e.joint_resource.as_ref(), Some(singlet_density()));
            assert!(e.alice_particle.is_none());
        }
        let pion = pion_source();
        let e = sample_emission(&pion, 0.999).unwrap();
        assert_eq!(e.channel_label, "ge+e-");
        assert_eq!(e.delivery, DeliveryKind::AliceOnly);
        assert!(e.alice_particle.is_some() && e.joint_resource.is_none());
        let e = sample_emission(&pion, 0.99999).unwrap();
        assert_eq!(e.delivery, DeliveryKind::None);
        assert!(e.alice_particle.is_none() && e.joint_resource.is_none());
        let u = cascade_source(1e-2, 1.0).unwrap();
        let e = sample_emission(&u, 0.9999).unwrap();
        assert_eq!(e.delivery, DeliveryKind::UncorrelatedPair);
        assert_eq!(
            e.joint_resource.unwrap().max_abs_diff(&DensityMatrix::maximally_mixed(2).unwrap()),
            0.0
        );
        assert!(sample_emission(&pion, 1.0).is_err());
    }

    #[test]
    fn documents() {
        let doc = serde_json::to_string(&pion_table()).unwrap();
        assert_eq!(load_source(&doc).unwrap(), pion_source());

        let bad = r#"{"name":"x","channels":[{"label":"a","probability":1,"delivery":"teleporting"}]}"#;
        let err = load_source(bad).unwrap_err().to_string();
        assert!(err.contains("ParseError") && err.contains("teleporting"), "{err}");
        assert!(err.contains("line 1"), "{err}");

        let missing = r#"{"name":"x"}"#;
        let err = load_source(missing).unwrap_err().to_string();
        assert!(err.contains("channels"), "{err}");

        let sci = r#"{"name":"s","channels":[
            {"label":"a","probability":9.9999e-1,"delivery":"entangled_pair"},
            {"label":"b","probability":1E-5,"delivery":"bob_only"}]}"#;
        let m = load_source(sci).unwrap();
        assert_eq!(m.probability_of(DeliveryKind::BobOnly), 1e-5);

        let low = r#"{"name":"s","channels":[{"label":"a","probability":0.9,"delivery":"none"}]}"#;
        assert!(matches!(load_source(low), Err(SourceError::ProbabilitySum(_))));
    }

    #[test]
    fn builtins() {
        assert_eq!(builtin("pion").unwrap().unwrap(), pion_source());
        assert_eq!(builtin("ideal").unwrap().unwrap(), ideal_source());
        assert_eq!(
            builtin("cascade:c2=1e-4,u=0.1").unwrap().unwrap(),
            cascade_source(1e-4, 0.1).unwrap()
        );
        assert_eq!(
            builtin("cascade:c2=1e-5").unwrap().unwrap(),
            cascade_source(1e-5, DEFAULT_UNCORRELATED_FRACTION).unwrap()
        );
        assert!(builtin("cascade:c2=abc").unwrap().is_err());
        assert!(builtin("cascade:u=0.1").unwrap().is_err());
        assert!(builtin("cascade:c2=0.5").unwrap().is_err());
        assert!(builtin("tables/pion.json").is_none());
    }

    fn arb_table() -> impl Strategy<Value = SourceTable> {
        let kind = prop::sample::select(DeliveryKind::ALL.to_vec());
        (prop::collection::vec((0.0f64..1.0, kind), 1..6), -5e-4f64..5e-4).prop_map(|(rows, skew)| {
            let total: f64 = rows.iter().map(|r| r.0).sum::<f64>().max(1e-9);
            SourceTable {
                name: "random".into(),
                channels: rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (w, d))| SourceChannel::new(format!("c{i}"), (w / total) * (1.0 + skew), d))
                    .filter(|c| c.probability <= 1.0)
                    .collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn validated_models_sum_to_one(table in arb_table()) {
            if let Ok(m) = validate(table) {
                let total: f64 = m.channels().iter().map(|c| c.probability).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn serialization_round_trips(table in arb_table()) {
            if let Ok(m) = validate(table) {
                let back = load_source(&m.to_json()).unwrap();
                prop_assert_eq!(back, m);
            }
        }

        #[test]
        fn cascade_probabilities_sum_to_one(c2 in 0.0f64..=0.01, u in 0.0f64..=1.0) {
            let m = cascade_source(c2, u).unwrap();
            let total = m.probability_of(DeliveryKind::EntangledPair)
                + m.probability_of(DeliveryKind::AliceOnly)
                + m.probability_of(DeliveryKind::UncorrelatedPair);
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sampling_is_pure(draw in 0.0f64..1.0) {
            let m = pion_source();
            prop_assert_eq!(sample_emission(&m, draw).unwrap(), sample_emission(&m, draw).unwrap());
        }
    }
}
