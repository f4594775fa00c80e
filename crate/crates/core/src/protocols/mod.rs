//! Randomized benchmarking and iterative interleaved benchmarking.
//!
//! Sequences are listed in time order. An RB sequence of length `m` is `m`
//! uniformly random Cliffords followed by the recovery Clifford; the IRB
//! variant inserts `n` copies of a target after every random Clifford and
//! recomputes the recovery so the ideal sequence is the identity.

mod backend;
mod decay;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{recovery_gate, CliffordElement, GeneratorPulse};
use crate::error::{Error, Result};

pub use backend::{Backend, ExactBackend, PulseBackend, SpamBackend};
pub use decay::{fit_decay, DecayFit};

/// One scheduled operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    /// A Clifford played through its pulse decomposition.
    Clifford(CliffordElement),
    /// A single pulse played directly, as for interleaved targets and
    /// calibration sequences.
    Pulse(GeneratorPulse),
}

impl Gate {
    pub fn ideal_clifford(&self) -> CliffordElement {
        match self {
            Gate::Clifford(c) => *c,
            Gate::Pulse(p) => p.clifford(),
        }
    }
}

/// Gate repeated between the random Cliffords of an IRB sequence.
/// Serialized as its string form, `C12` or `X90,Y90`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Target {
    /// Played as the pulses of its decomposition.
    Clifford(CliffordElement),
    Pulses(Vec<GeneratorPulse>),
}

impl Target {
    pub fn gates(&self) -> Vec<Gate> {
        let pulses: &[GeneratorPulse] = match self {
            Target::Clifford(c) => c.decompose(),
            Target::Pulses(p) => p,
        };
        pulses.iter().map(|p| Gate::Pulse(*p)).collect()
    }

    pub fn ideal_clifford(&self) -> CliffordElement {
        self.gates()
            .iter()
            .fold(CliffordElement::IDENTITY, |acc, g| acc.then(g.ideal_clifford()))
    }

    /// Number of generator pulses in one copy of the target.
    pub fn pulse_count(&self) -> usize {
        self.gates().len()
    }
}

impl Default for Target {
    fn default() -> Self {
        Target::Pulses(vec![GeneratorPulse::X90])
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Clifford(c) => write!(f, "{c}"),
            Target::Pulses(p) => {
                let names: Vec<&str> = p.iter().map(|p| p.name()).collect();
                write!(f, "{}", names.join(","))
            }
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    /// `C12` for a Clifford index, otherwise pulse names joined by `-` or
    /// `,` (e.g. `X90,Y90`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(idx) = s.strip_prefix('C').or_else(|| s.strip_prefix('c')) {
            if let Ok(i) = idx.parse::<usize>() {
                return Ok(Target::Clifford(CliffordElement::from_index(i)?));
            }
        }
        let pulses = s
            .split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(GeneratorPulse::from_str)
            .collect::<Result<Vec<_>>>()?;
        if pulses.is_empty() {
            return Err(Error::invalid("empty target"));
        }
        Ok(Target::Pulses(pulses))
    }
}

impl TryFrom<String> for Target {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.to_string()
    }
}

#[cfg(feature = "schema")]
impl schemars::JsonSchema for Target {
    fn schema_name() -> String {
        "Target".into()
    }

    fn json_schema(g: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        String::json_schema(g)
    }
}

/// Measurement model for survival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shots {
    /// The exact probability.
    #[default]
    Exact,
    /// Binomial estimate from this many repetitions.
    Finite(u64),
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(Error::invalid(format!(
                "shots must be \"exact\" or a positive integer, got {s:?}"
            ))),
            Ok(n) => Ok(Shots::Finite(n)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Word(String),
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => ShotsRepr::Word("exact".into()).serialize(s),
            Shots::Finite(n) => ShotsRepr::Count(*n).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ShotsRepr::deserialize(d)? {
            ShotsRepr::Count(0) => Err(serde::de::Error::custom("shots must be positive")),
            ShotsRepr::Count(n) => Ok(Shots::Finite(n)),
            ShotsRepr::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(feature = "schema")]
impl schemars::JsonSchema for Shots {
    fn schema_name() -> String {
        "Shots".into()
    }

    fn json_schema(g: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        ShotsRepr::json_schema(g)
    }
}

/// Lengths 2..365, twelve points spaced roughly logarithmically.
pub fn default_lengths() -> Vec<usize> {
    vec![2, 3, 5, 8, 13, 21, 34, 55, 88, 142, 227, 365]
}

/// Standard RB settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct RbConfig {
    /// Numbers of random Cliffords, ascending.
    pub lengths: Vec<usize>,
    /// Random sequences per length.
    pub num_seeds: usize,
    pub shots: Shots,
    pub seed: u64,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            lengths: default_lengths(),
            num_seeds: 35,
            shots: Shots::Exact,
            seed: 0,
        }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::invalid("at least one sequence length is required"));
        }
        if self.lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("lengths must be strictly ascending"));
        }
        if self.lengths[0] == 0 {
            return Err(Error::invalid("lengths must be at least 1"));
        }
        if *self.lengths.last().unwrap() > 10_000 {
            return Err(Error::invalid("lengths must not exceed 10000"));
        }
        if self.num_seeds < 2 {
            return Err(Error::invalid("num_seeds must be at least 2"));
        }
        Ok(())
    }
}

/// IRB settings: one RB experiment per repeat count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct IrbConfig {
    pub base: RbConfig,
    pub target: Target,
    /// Repeat counts `n`; 0 is plain RB.
    pub repeats: Vec<usize>,
    /// Interleave into the same random sequences for every `n`. When off,
    /// every repeat count draws fresh sequences.
    pub shared_sequences: bool,
}

impl Default for IrbConfig {
    fn default() -> Self {
        Self {
            base: RbConfig::default(),
            target: Target::default(),
            repeats: (0..=16).collect(),
            shared_sequences: true,
        }
    }
}

impl IrbConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.repeats.is_empty() {
            return Err(Error::invalid("at least one repeat count is required"));
        }
        let mut sorted = self.repeats.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.repeats.len() {
            return Err(Error::invalid("repeat counts must be distinct"));
        }
        Ok(())
    }
}

/// Word position where shot sampling starts when sequences are shared.
const SHOT_WORD_OFFSET: u128 = 1 << 40;

/// Random stream for one (length, seed index, repeat count) cell.
pub fn cell_rng(master: u64, length: usize, seed_index: usize, n: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    let stream = ((n as u64) << 42) ^ ((seed_index as u64) << 21) ^ length as u64;
    rng.set_stream(stream);
    rng
}

/// `length` random Cliffords followed by the recovery gate.
pub fn generate_rb_sequence<R: Rng + ?Sized>(length: usize, rng: &mut R) -> Result<Vec<CliffordElement>> {
    if length == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    let mut seq: Vec<CliffordElement> = (0..length).map(|_| CliffordElement::random(rng)).collect();
    seq.push(recovery_gate(&seq));
    Ok(seq)
}

/// Inserts `n` copies of `target` after every random Clifford of an RB
/// sequence (whose last element is its recovery) and recomputes the
/// recovery. `n = 0` returns the sequence unchanged.
pub fn interleave(sequence: &[CliffordElement], target: &Target, n: usize) -> Vec<Gate> {
    let Some((_, random)) = sequence.split_last() else {
        return Vec::new();
    };
    if n == 0 {
        return sequence.iter().map(|c| Gate::Clifford(*c)).collect();
    }
    let block = target.gates();
    let mut gates = Vec::with_capacity(random.len() * (1 + n * block.len()) + 1);
    let mut net = CliffordElement::IDENTITY;
    let target_net = (0..n).fold(CliffordElement::IDENTITY, |acc, _| acc.then(target.ideal_clifford()));
    for c in random {
        gates.push(Gate::Clifford(*c));
        for _ in 0..n {
            gates.extend_from_slice(&block);
        }
        net = net.then(*c).then(target_net);
    }
    gates.push(Gate::Clifford(net.inverse()));
    gates
}

/// Survival probability of `gates` applied to |0>; sampled when `shots`
/// is finite.
pub fn run<B: Backend + ?Sized, R: Rng + ?Sized>(
    gates: &[Gate],
    backend: &B,
    shots: Shots,
    rng: &mut R,
) -> Result<f64> {
    let p = backend.survival(gates)?.clamp(0.0, 1.0);
    match shots {
        Shots::Exact => Ok(p),
        Shots::Finite(n) => {
            let dist = Binomial::new(n, p).map_err(|e| Error::invalid(format!("binomial sampling: {e}")))?;
            Ok(dist.sample(rng) as f64 / n as f64)
        }
    }
}

/// Survival probabilities against sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    /// Number of random Cliffords.
    pub x: Vec<usize>,
    pub y_mean: Vec<f64>,
    /// Standard error of the mean over seeds.
    pub y_stderr: Vec<f64>,
    /// `raw[i][s]`: seed `s` at length `x[i]`.
    pub raw: Vec<Vec<f64>>,
    /// Interleave count (0 for plain RB).
    pub n_interleave: usize,
    pub seed: u64,
    pub shots: Shots,
}

impl DecaySeries {
    fn from_raw(x: Vec<usize>, raw: Vec<Vec<f64>>, n_interleave: usize, seed: u64, shots: Shots) -> Self {
        let (y_mean, y_stderr) = raw
            .iter()
            .map(|vals| {
                let k = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / k;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
                (mean, (var / k).sqrt())
            })
            .unzip();
        Self {
            x,
            y_mean,
            y_stderr,
            raw,
            n_interleave,
            seed,
            shots,
        }
    }
}

fn measure_series<B: Backend + ?Sized>(
    cfg: &RbConfig,
    target: &Target,
    n: usize,
    shared: bool,
    backend: &B,
) -> Result<DecaySeries> {
    let cells: Vec<(usize, usize)> = (0..cfg.lengths.len())
        .flat_map(|li| (0..cfg.num_seeds).map(move |s| (li, s)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(li, s)| {
            let length = cfg.lengths[li];
            let mut rng = cell_rng(cfg.seed, length, s, if shared { 0 } else { n });
            let seq = generate_rb_sequence(length, &mut rng)?;
            if shared {
                // Shot noise must still differ between repeat counts.
                rng = cell_rng(cfg.seed, length, s, n);
                rng.set_word_pos(SHOT_WORD_OFFSET);
            }
            let gates = interleave(&seq, target, n);
            run(&gates, backend, cfg.shots, &mut rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    let raw: Vec<Vec<f64>> = values.chunks(cfg.num_seeds).map(|c| c.to_vec()).collect();
    Ok(DecaySeries::from_raw(cfg.lengths.clone(), raw, n, cfg.seed, cfg.shots))
}

/// Runs standard RB and fits `A alpha^m + B`.
pub fn rb_experiment<B: Backend + ?Sized>(cfg: &RbConfig, backend: &B) -> Result<(DecaySeries, DecayFit)> {
    cfg.validate()?;
    let series = measure_series(cfg, &Target::default(), 0, false, backend)?;
    let fit = fit_decay(&series)?;
    Ok((series, fit))
}

/// Decay for one repeat count of an IRB experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrbPoint {
    pub n: usize,
    pub series: DecaySeries,
    pub fit: DecayFit,
    /// `alpha_n / alpha_0` when `n = 0` was measured.
    pub segment_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrbResult {
    pub target: Target,
    pub points: Vec<IrbPoint>,
}

impl IrbResult {
    /// `(n, alpha_n)` pairs in the order measured.
    pub fn alphas(&self) -> Vec<(usize, f64)> {
        self.points.iter().map(|p| (p.n, p.fit.alpha)).collect()
    }

    /// `(n, alpha_n / alpha_0)`; `None` if `n = 0` was not measured.
    pub fn segment_ratios(&self) -> Option<Vec<(usize, f64)>> {
        self.points.iter().map(|p| p.segment_ratio.map(|r| (p.n, r))).collect()
    }

    /// 95% half-widths of alpha_n, aligned with [`alphas`](Self::alphas).
    pub fn alpha_halfwidths(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| 0.5 * (p.fit.alpha_ci95[1] - p.fit.alpha_ci95[0]))
            .collect()
    }
}

/// Runs one RB experiment per repeat count with the target interleaved.
pub fn irb_experiment<B: Backend + ?Sized>(cfg: &IrbConfig, backend: &B) -> Result<IrbResult> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.repeats.len());
    for &n in &cfg.repeats {
        let series = measure_series(&cfg.base, &cfg.target, n, cfg.shared_sequences, backend)?;
        let fit = fit_decay(&series)?;
        points.push(IrbPoint {
            n,
            series,
            fit,
            segment_ratio: None,
        });
    }
    if let Some(a0) = points.iter().find(|p| p.n == 0).map(|p| p.fit.alpha) {
        for p in &mut points {
            p.segment_ratio = Some(p.fit.alpha / a0);
        }
    }
    Ok(IrbResult {
        target: cfg.target.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::compose_sequence;

    #[test]
    fn length_one_is_element_and_inverse() {
        let mut rng = cell_rng(7, 1, 0, 0);
        let seq = generate_rb_sequence(1, &mut rng).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq[1], seq[0].inverse());
    }

    #[test]
    fn sequences_are_deterministic() {
        let a = generate_rb_sequence(50, &mut cell_rng(3, 50, 4, 2)).unwrap();
        let b = generate_rb_sequence(50, &mut cell_rng(3, 50, 4, 2)).unwrap();
        let c = generate_rb_sequence(50, &mut cell_rng(3, 50, 5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn interleave_cases() {
        let seq = generate_rb_sequence(20, &mut cell_rng(1, 20, 0, 0)).unwrap();
        let plain = interleave(&seq, &Target::default(), 0);
        assert_eq!(plain, seq.iter().map(|c| Gate::Clifford(*c)).collect::<Vec<_>>());

        let ident = interleave(&seq, &Target::Clifford(CliffordElement::IDENTITY), 1);
        assert_eq!(ident.last(), plain.last());
        assert_eq!(ident.len(), 20 * 2 + 1);

        let x90 = interleave(&seq, &Target::Pulses(vec![GeneratorPulse::X90]), 4);
        let net = x90
            .iter()
            .fold(CliffordElement::IDENTITY, |a, g| a.then(g.ideal_clifford()));
        assert_eq!(net, CliffordElement::IDENTITY);
        assert_eq!(compose_sequence(&seq), CliffordElement::IDENTITY);
    }

    #[test]
    fn target_parsing() {
        assert_eq!(
            "X90,Y90".parse::<Target>().unwrap(),
            Target::Pulses(vec![GeneratorPulse::X90, GeneratorPulse::Y90])
        );
        assert_eq!(
            "C12".parse::<Target>().unwrap(),
            Target::Clifford(CliffordElement::from_index(12).unwrap())
        );
        assert!("Z45".parse::<Target>().is_err());
    }

    #[test]
    fn shots_serde() {
        assert_eq!(serde_json::from_str::<Shots>("\"exact\"").unwrap(), Shots::Exact);
        assert_eq!(serde_json::from_str::<Shots>("1000").unwrap(), Shots::Finite(1000));
        assert!(serde_json::from_str::<Shots>("0").is_err());
        assert_eq!(serde_json::to_string(&Shots::Finite(5)).unwrap(), "5");
    }
}
