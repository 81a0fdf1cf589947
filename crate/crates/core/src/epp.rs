//! Deterministic purification: hyperentangled source, noisy channel, the two
//! QND steps with feed-forward, and branch accounting.
//!
//! The channel mixture is expanded as a tree over the four Pauli error classes
//! (and over time samples when Δφ_f fluctuates), so every leaf names the error
//! that produced it. [`mixed_leaves`] evolves the single mixed matrix instead;
//! both agree to rounding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{anticorrelated_pair, correlated_pair, product_vector, BellLabel, Coordinate, Dof, Party, ONE, ZERO};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::optics::{local_gate, Correction, Element, Parties, PhaseFlag, QndOutcome, RoutingMap, Stage, Trajectory};
use crate::optics;
use crate::practical::FluctuationSpec;
use crate::state::{self, make_pure, partial_trace, polarization_fidelity, DensityMatrix, KrausSet, ReducedState, StateDump};

/// Allowed deviation of `a+b+c+d` from 1.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Bell-diagonal polarization noise plus spatial and frequency dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default)]
    pub dphi_s: f64,
    #[serde(default)]
    pub dphi_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluctuation: Option<FluctuationSpec>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            dphi_s: 0.0,
            dphi_f: 0.0,
            fluctuation: None,
        }
    }
}

impl NoiseModel {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let n = Self {
            a,
            b,
            c,
            d,
            ..Self::default()
        };
        n.validate()?;
        Ok(n)
    }

    pub fn with_dispersion(mut self, dphi_s: f64, dphi_f: f64) -> Self {
        self.dphi_s = dphi_s;
        self.dphi_f = dphi_f;
        self
    }

    pub fn with_fluctuation(mut self, spec: FluctuationSpec) -> Self {
        self.fluctuation = Some(spec);
        self
    }

    /// Weight of the given Bell state in the channel output.
    pub fn weight(&self, class: BellLabel) -> f64 {
        match class {
            BellLabel::PhiPlus => self.a,
            BellLabel::PhiMinus => self.b,
            BellLabel::PsiPlus => self.c,
            BellLabel::PsiMinus => self.d,
        }
    }

    /// `a + c − b − d`, the bit-flip-corrected contrast.
    pub fn contrast(&self) -> f64 {
        self.a + self.c - self.b - self.d
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex(self.a, self.b, self.c, self.d)?;
        for (name, v) in [("dphi_s", self.dphi_s), ("dphi_f", self.dphi_f)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if let Some(f) = &self.fluctuation {
            f.validate()?;
            if (f.base - self.dphi_f).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "fluctuation base {} differs from dphi_f {}",
                    f.base, self.dphi_f
                )));
            }
        }
        Ok(())
    }

    /// Frequency phases the channel can take, with their time weights.
    fn frequency_samples(&self) -> Result<Vec<(Option<usize>, f64, f64)>> {
        Ok(match &self.fluctuation {
            None => vec![(None, 1.0, self.dphi_f)],
            Some(f) => f
                .phase_samples()?
                .into_iter()
                .enumerate()
                .map(|(k, (phi, w))| (Some(k), w, phi))
                .collect(),
        })
    }
}

/// Checks `a,b,c,d ≥ 0` and `a+b+c+d = 1`.
pub fn check_simplex(a: f64, b: f64, c: f64, d: f64) -> Result<()> {
    let w = [a, b, c, d];
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidArgument(format!("weights {w:?} must be finite and nonnegative")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("weights {w:?} sum to {sum}, not 1")));
    }
    Ok(())
}

/// `(|HH⟩+|VV⟩)(|ω1ω2⟩+|ω2ω1⟩)(|a1b1⟩+|a2b2⟩)/(2√2)`.
pub fn source_state() -> DensityMatrix {
    let v = product_vector(
        &BellLabel::PhiPlus.amplitudes(),
        &anticorrelated_pair(0.0),
        &correlated_pair(0.0),
    );
    make_pure(v.as_slice()).expect("source vector is normalized")
}

/// Pauli on Bob's polarization taking Φ+ to `class`.
fn error_operator(class: BellLabel) -> CMatrix {
    let g = match class {
        BellLabel::PhiPlus => [[ONE, ZERO], [ZERO, ONE]],
        BellLabel::PhiMinus => [[ONE, ZERO], [ZERO, -ONE]],
        BellLabel::PsiPlus => [[ZERO, ONE], [ONE, ZERO]],
        BellLabel::PsiMinus => [[ZERO, -ONE], [ONE, ZERO]],
    };
    local_gate(Coordinate::PolB, g)
}

fn disperse(rho: &DensityMatrix, dphi_s: f64, dphi_f: f64) -> DensityMatrix {
    let s = optics::local_phase(rho, PhaseFlag::new(Coordinate::RailB, 1), dphi_s);
    optics::local_phase(&s, PhaseFlag::new(Coordinate::FreqA, 1), dphi_f)
}

/// One Pauli component of the channel, with dispersion applied.
pub fn error_branch(rho: &DensityMatrix, class: BellLabel, dphi_s: f64, dphi_f: f64) -> DensityMatrix {
    disperse(&state::evolve(rho, &error_operator(class)), dphi_s, dphi_f)
}

/// Kraus operators `D·√w·P` of the channel, where `P` runs over the four
/// Paulis on Bob and `D` is the dispersion phase.
pub fn channel_kraus(n: &NoiseModel) -> Result<KrausSet> {
    n.validate()?;
    let dispersion = optics::phase_operator(PhaseFlag::new(Coordinate::RailB, 1), n.dphi_s)
        * optics::phase_operator(PhaseFlag::new(Coordinate::FreqA, 1), n.dphi_f);
    let ops = BellLabel::ALL
        .iter()
        .filter(|&&class| n.weight(class) > 0.0)
        .map(|&class| &dispersion * error_operator(class) * Complex64::new(n.weight(class).sqrt(), 0.0))
        .collect();
    KrausSet::new(ops)
}

/// Pauli channel on Bob's polarization followed by the dispersion phases.
/// Uses `n.dphi_f` even when a fluctuation is attached.
pub fn apply_channel(rho: &DensityMatrix, n: &NoiseModel) -> Result<DensityMatrix> {
    n.validate()?;
    let mut m = CMatrix::zeros(rho.matrix().nrows(), rho.matrix().ncols());
    for class in BellLabel::ALL {
        let w = n.weight(class);
        if w > 0.0 {
            m += linalg::sandwich(&error_operator(class), rho.matrix()) * Complex64::new(w, 0.0);
        }
    }
    Ok(disperse(&DensityMatrix::from_raw(m), n.dphi_s, n.dphi_f))
}

/// QND parity check and σx on Bob after unequal phases.
pub fn bitflip_elements() -> Vec<Element> {
    vec![Element::QndPbs {}, Element::CorrectBitFlip { party: Party::Bob }]
}

/// Hadamards, frequency routing, QND, corrections and frequency erasure.
pub fn phaseflip_elements() -> Vec<Element> {
    vec![
        Element::Hadamard { parties: Parties::Both },
        Element::Wdm(RoutingMap::default()),
        Element::QndPbs {},
        Element::CorrectBitFlip { party: Party::Bob },
        Element::FlipBothOnAliceZero {},
        Element::FrequencyErase {},
    ]
}

/// Both steps with the rail reset in between, optionally compensated.
pub fn protocol_elements(compensation: Option<f64>) -> Vec<Element> {
    let mut e = bitflip_elements();
    e.push(Element::ResetRails {});
    e.extend(phaseflip_elements());
    if let Some(phi) = compensation {
        e.push(Element::CompensatePhase { phi });
    }
    e
}

/// Output of one purification step on one measurement branch.
#[derive(Debug, Clone)]
pub struct StepBranch {
    pub outcome: QndOutcome,
    pub corrections: Vec<Correction>,
    pub probability: f64,
    pub state: DensityMatrix,
}

fn to_step_branches(ts: Vec<Trajectory>) -> Vec<StepBranch> {
    ts.into_iter()
        .map(|t| StepBranch {
            outcome: *t.outcomes.last().expect("step contains a QND"),
            corrections: t.corrections,
            probability: t.probability,
            state: t.state,
        })
        .collect()
}

/// First step. Branch states keep the rails the photons exit on.
pub fn bitflip_step(rho: &DensityMatrix) -> Vec<StepBranch> {
    let ts = optics::run_pipeline(Trajectory::start(rho.clone()), &bitflip_elements())
        .expect("bit-flip step has no failing element");
    to_step_branches(ts)
}

/// Moves both photons back to rail-1 after a QND that emitted on `outcome`.
pub fn reset_rails(rho: &DensityMatrix, outcome: QndOutcome) -> DensityMatrix {
    let t = Trajectory {
        outcomes: vec![outcome],
        ..Trajectory::start(rho.clone())
    };
    let mut out = Element::ResetRails {}.apply(t).expect("outcome is present");
    out.pop().expect("reset keeps one trajectory").state
}

/// Second step; the input must have both photons in rail-1.
pub fn phaseflip_step(rho: &DensityMatrix) -> Result<Vec<StepBranch>> {
    let stray = rho.population(Coordinate::RailA, 1) + rho.population(Coordinate::RailB, 1);
    if stray > 1e-12 {
        return Err(Error::InvalidState(format!(
            "phase-flip step needs both photons in rail-1 (rail-2 population {stray:e})"
        )));
    }
    let ts = optics::run_pipeline(Trajectory::start(rho.clone()), &phaseflip_elements())?;
    Ok(to_step_branches(ts))
}

/// Polarization marginal after the first step, summed over its branches.
pub fn bitflip_marginal(n: &NoiseModel) -> Result<ReducedState> {
    let rho = apply_channel(&source_state(), n)?;
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    for b in bitflip_step(&rho) {
        m += partial_trace(&b.state, &[Dof::Pol])?.matrix() * Complex64::new(b.probability, 0.0);
    }
    Ok(ReducedState::from_raw(vec![Dof::Pol], m))
}

/// How [`run_epp`] explores the branch tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    Exhaustive,
    Sampled { seed: u64, trials: u64 },
}

/// One leaf of the exhaustive tree.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub error_class: BellLabel,
    pub time_sample: Option<usize>,
    pub dphi_f: f64,
    pub trajectory: Trajectory,
}

/// Every leaf with nonzero probability, in canonical order: time sample,
/// error class, first outcome, second outcome.
pub fn exhaustive_leaves(n: &NoiseModel, compensation: Option<f64>) -> Result<Vec<Leaf>> {
    n.validate()?;
    let source = source_state();
    let elements = protocol_elements(compensation);
    let mut jobs = Vec::new();
    for (sample, w, dphi_f) in n.frequency_samples()? {
        for class in BellLabel::ALL {
            let p = w * n.weight(class);
            if p > 0.0 {
                jobs.push((sample, class, p, dphi_f));
            }
        }
    }
    let groups: Vec<Result<Vec<Leaf>>> = jobs
        .par_iter()
        .map(|&(sample, class, p, dphi_f)| {
            let start = Trajectory {
                probability: p,
                ..Trajectory::start(error_branch(&source, class, n.dphi_s, dphi_f))
            };
            Ok(optics::run_pipeline(start, &elements)?
                .into_iter()
                .map(|trajectory| Leaf {
                    error_class: class,
                    time_sample: sample,
                    dphi_f,
                    trajectory,
                })
                .collect())
        })
        .collect();
    let mut leaves = Vec::new();
    for g in groups {
        leaves.extend(g?);
    }
    Ok(leaves)
}

/// A branch of the mixed-state evolution, keyed by its outcomes only.
#[derive(Debug, Clone)]
pub struct MixedLeaf {
    pub time_sample: Option<usize>,
    pub outcomes: Vec<QndOutcome>,
    pub probability: f64,
    pub state: DensityMatrix,
}

/// Runs the protocol on the full channel output instead of per error class.
pub fn mixed_leaves(n: &NoiseModel, compensation: Option<f64>) -> Result<Vec<MixedLeaf>> {
    n.validate()?;
    let source = source_state();
    let elements = protocol_elements(compensation);
    let mut out = Vec::new();
    for (sample, w, dphi_f) in n.frequency_samples()? {
        let fixed = NoiseModel {
            dphi_f,
            fluctuation: None,
            ..n.clone()
        };
        let start = Trajectory {
            probability: w,
            ..Trajectory::start(apply_channel(&source, &fixed)?)
        };
        for t in optics::run_pipeline(start, &elements)? {
            out.push(MixedLeaf {
                time_sample: sample,
                outcomes: t.outcomes,
                probability: t.probability,
                state: t.state,
            });
        }
    }
    Ok(out)
}

/// One row of a [`PurificationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub error_class: BellLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_sample: Option<usize>,
    pub dphi_f: f64,
    pub bitflip: QndOutcome,
    pub bitflip_modes: String,
    pub phaseflip: QndOutcome,
    pub phaseflip_modes: String,
    pub corrections: Vec<Correction>,
    /// Exact probability, or the observed frequency in sampled mode.
    pub probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    pub fidelity: f64,
    pub final_polarization: StateDump,
    #[serde(skip)]
    pub final_state: DensityMatrix,
}

impl BranchRecord {
    fn from_leaf(leaf: &Leaf) -> Result<Self> {
        let t = &leaf.trajectory;
        let [first, second] = t.outcomes[..] else {
            return Err(Error::ContractViolation(format!(
                "expected two QND outcomes, found {}",
                t.outcomes.len()
            )));
        };
        let pol = partial_trace(&t.state, &[Dof::Pol])?;
        Ok(Self {
            error_class: leaf.error_class,
            time_sample: leaf.time_sample,
            dphi_f: leaf.dphi_f,
            bitflip: first,
            bitflip_modes: first.modes(Stage::Spatial),
            phaseflip: second,
            phaseflip_modes: second.modes(Stage::Frequency),
            corrections: t.corrections.clone(),
            probability: t.probability,
            exact_probability: None,
            count: None,
            fidelity: polarization_fidelity(&t.state, BellLabel::PhiPlus),
            final_polarization: StateDump::from_matrix(pol.matrix()),
            final_state: t.state.clone(),
        })
    }
}

/// Branch tree of one purification run.
#[derive(Debug, Clone, Serialize)]
pub struct PurificationReport {
    pub target: BellLabel,
    pub mode: Mode,
    pub noise: NoiseModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compensation: Option<f64>,
    pub branches: Vec<BranchRecord>,
    pub total_probability: f64,
    pub min_final_fidelity: f64,
    pub max_final_fidelity: f64,
    /// Probability-weighted mean fidelity to the target.
    pub mean_final_fidelity: f64,
}

/// CSV row for [`PurificationReport::write_csv`].
#[derive(Serialize)]
struct BranchRow<'a> {
    error_class: BellLabel,
    time_sample: Option<usize>,
    dphi_f: f64,
    bitflip_alice: optics::Phase,
    bitflip_bob: optics::Phase,
    bitflip_modes: &'a str,
    phaseflip_alice: optics::Phase,
    phaseflip_bob: optics::Phase,
    phaseflip_modes: &'a str,
    corrections: String,
    probability: f64,
    count: Option<u64>,
    fidelity: f64,
}

fn correction_label(c: &Correction) -> String {
    match c {
        Correction::SigmaX { party } => format!("sigma_x:{}", party_name(*party)),
        Correction::SigmaXBoth => "sigma_x:both".into(),
        Correction::ResetRails { alice, bob } => format!("reset_rails:{alice}{bob}"),
        Correction::Compensate { phi } => format!("compensate:{phi}"),
    }
}

fn party_name(p: Party) -> &'static str {
    match p {
        Party::Alice => "alice",
        Party::Bob => "bob",
    }
}

impl PurificationReport {
    fn from_branches(
        n: &NoiseModel,
        mode: Mode,
        compensation: Option<f64>,
        branches: Vec<BranchRecord>,
    ) -> Self {
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        let live = branches.iter().filter(|b| b.probability > 0.0);
        let min = live.clone().map(|b| b.fidelity).fold(f64::INFINITY, f64::min);
        let max = live.map(|b| b.fidelity).fold(f64::NEG_INFINITY, f64::max);
        let mean = branches.iter().map(|b| b.probability * b.fidelity).sum::<f64>() / total;
        Self {
            target: BellLabel::PhiPlus,
            mode,
            noise: n.clone(),
            compensation,
            branches,
            total_probability: total,
            min_final_fidelity: min,
            max_final_fidelity: max,
            mean_final_fidelity: mean,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per branch.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.branches {
            w.serialize(BranchRow {
                error_class: b.error_class,
                time_sample: b.time_sample,
                dphi_f: b.dphi_f,
                bitflip_alice: b.bitflip.alice_phase,
                bitflip_bob: b.bitflip.bob_phase,
                bitflip_modes: &b.bitflip_modes,
                phaseflip_alice: b.phaseflip.alice_phase,
                phaseflip_bob: b.phaseflip.bob_phase,
                phaseflip_modes: &b.phaseflip_modes,
                corrections: b.corrections.iter().map(correction_label).collect::<Vec<_>>().join(";"),
                probability: b.probability,
                count: b.count,
                fidelity: b.fidelity,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "target {}  branches {}  total probability {:.12}\nfidelity min {:.12}  max {:.12}  mean {:.12}\n",
            self.target,
            self.branches.len(),
            self.total_probability,
            self.min_final_fidelity,
            self.max_final_fidelity,
            self.mean_final_fidelity
        );
        s.push_str(&format!(
            "{:<6} {:<6} {:<6} {:<14} {:<14} {:>10}\n",
            "class", "step1", "step2", "probability", "fidelity", "count"
        ));
        for b in &self.branches {
            s.push_str(&format!(
                "{:<6} {:<6} {:<6} {:<14.10} {:<14.10} {:>10}\n",
                b.error_class.as_str(),
                b.bitflip_modes,
                b.phaseflip_modes,
                b.probability,
                b.fidelity,
                b.count.map(|c| c.to_string()).unwrap_or_default()
            ));
        }
        s
    }
}

/// Runs the full protocol, optionally followed by phase compensation.
pub fn run_epp_with(n: &NoiseModel, mode: Mode, compensation: Option<f64>) -> Result<PurificationReport> {
    if let Mode::Sampled { trials: 0, .. } = mode {
        return Err(Error::InvalidArgument("sampled mode needs trials > 0".into()));
    }
    let leaves = exhaustive_leaves(n, compensation)?;
    let mut records = leaves.iter().map(BranchRecord::from_leaf).collect::<Result<Vec<_>>>()?;
    if let Mode::Sampled { seed, trials } = mode {
        let counts = sample_counts(&leaves, seed, trials);
        records = records
            .into_iter()
            .zip(counts)
            .filter(|(_, k)| *k > 0)
            .map(|(mut r, k)| {
                r.exact_probability = Some(r.probability);
                r.probability = k as f64 / trials as f64;
                r.count = Some(k);
                r
            })
            .collect();
    }
    Ok(PurificationReport::from_branches(n, mode, compensation, records))
}

/// Runs the full protocol and reports fidelities to Φ+.
pub fn run_epp(n: &NoiseModel, mode: Mode) -> Result<PurificationReport> {
    run_epp_with(n, mode, None)
}

/// Leaf visit counts for `trials` trajectories. Trial `k` draws from its own
/// ChaCha stream, so counts do not depend on thread scheduling.
pub fn sample_counts(leaves: &[Leaf], seed: u64, trials: u64) -> Vec<u64> {
    let mut cumulative = Vec::with_capacity(leaves.len());
    let mut acc = 0.0;
    for l in leaves {
        acc += l.trajectory.probability;
        cumulative.push(acc);
    }
    let picks: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let u: f64 = rng.random::<f64>() * acc;
            cumulative.partition_point(|&c| c <= u).min(leaves.len() - 1)
        })
        .collect();
    let mut counts = vec![0u64; leaves.len()];
    for p in picks {
        counts[p] += 1;
    }
    counts
}
