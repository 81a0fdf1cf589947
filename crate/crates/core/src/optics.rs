//! Optical elements as exact operators on the two-photon space.
//!
//! The QND module couples a PBS to a cross-Kerr medium. For each party the
//! probe picks up θ exactly when the photon's polarization bit equals its
//! rail bit, and the photon leaves on the rail numbered by the outcome
//! (θ → rail 2, 0 → rail 1). This single parity rule reproduces every branch
//! of both purification steps, including the emitted modes.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{Coordinate, Dof, Party, DIM, ONE, ZERO};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::{self, DensityMatrix, KrausSet};

/// Homodyne readout of one probe beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "theta")]
    Theta,
}

impl Phase {
    pub fn bit(self) -> u8 {
        match self {
            Phase::Zero => 0,
            Phase::Theta => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Phase::Zero
        } else {
            Phase::Theta
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Zero => "0",
            Phase::Theta => "theta",
        })
    }
}

/// Which purification stage a QND outcome belongs to; only affects mode names
/// (a/b before the frequency routers, c/d after).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Spatial,
    Frequency,
}

/// Result of one QND round: both probe phases and the emitted rails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QndOutcome {
    pub alice_phase: Phase,
    pub bob_phase: Phase,
    /// Rail bit (0 = rail-1, 1 = rail-2).
    pub alice_rail: u8,
    pub bob_rail: u8,
}

impl QndOutcome {
    pub fn from_phases(alice: Phase, bob: Phase) -> Self {
        Self {
            alice_phase: alice,
            bob_phase: bob,
            alice_rail: alice.bit(),
            bob_rail: bob.bit(),
        }
    }

    /// Index into the QND Kraus set.
    pub fn index(&self) -> usize {
        2 * self.alice_phase.bit() as usize + self.bob_phase.bit() as usize
    }

    pub fn from_index(index: usize) -> Self {
        Self::from_phases(Phase::from_bit((index >> 1) as u8 & 1), Phase::from_bit(index as u8 & 1))
    }

    pub fn phases_equal(&self) -> bool {
        self.alice_phase == self.bob_phase
    }

    /// Emitted mode pair, e.g. `a2b1` or `c1d2`.
    pub fn modes(&self, stage: Stage) -> String {
        let (a, b) = match stage {
            Stage::Spatial => ('a', 'b'),
            Stage::Frequency => ('c', 'd'),
        };
        format!("{a}{}{b}{}", self.alice_rail + 1, self.bob_rail + 1)
    }
}

/// One branch of the QND measurement.
#[derive(Debug, Clone)]
pub struct QndBranch {
    pub outcome: QndOutcome,
    pub probability: f64,
    pub state: DensityMatrix,
}

fn qnd_operator(outcome: QndOutcome) -> CMatrix {
    let mut k = CMatrix::zeros(DIM, DIM);
    for i in 0..DIM {
        let fires = |pol: Coordinate, rail: Coordinate| (pol.bit(i) == rail.bit(i)) as u8;
        let a = fires(Coordinate::PolA, Coordinate::RailA);
        let b = fires(Coordinate::PolB, Coordinate::RailB);
        if a == outcome.alice_phase.bit() && b == outcome.bob_phase.bit() {
            let rails = Coordinate::RailA.mask() | Coordinate::RailB.mask();
            let j = (i & !rails)
                | ((a as usize) << Coordinate::RailA.shift())
                | ((b as usize) << Coordinate::RailB.shift());
            k[(j, i)] = ONE;
        }
    }
    k
}

/// The four QND operators, indexed by [`QndOutcome::index`].
pub fn qnd_kraus() -> &'static KrausSet {
    static SET: OnceLock<KrausSet> = OnceLock::new();
    SET.get_or_init(|| {
        let ops = (0..4).map(|i| qnd_operator(QndOutcome::from_index(i))).collect();
        KrausSet::new(ops).expect("QND operators form a complete set")
    })
}

/// PBS-coupled cross-Kerr parity check on both photons.
pub fn qnd_pbs(rho: &DensityMatrix) -> Vec<QndBranch> {
    state::measure(rho, qnd_kraus())
        .into_iter()
        .map(|b| QndBranch {
            outcome: QndOutcome::from_index(b.outcome),
            probability: b.probability,
            state: b.state,
        })
        .collect()
}

/// Per-party wavelength router: frequency bit → rail bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRoutingMap")]
pub struct RoutingMap {
    alice: [u8; 2],
    bob: [u8; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoutingMap {
    alice: [u8; 2],
    bob: [u8; 2],
}

impl TryFrom<RawRoutingMap> for RoutingMap {
    type Error = Error;

    fn try_from(raw: RawRoutingMap) -> Result<Self> {
        RoutingMap::new(raw.alice, raw.bob)
    }
}

impl Default for RoutingMap {
    /// Alice: ω1→c1, ω2→c2. Bob: ω1→d2, ω2→d1.
    fn default() -> Self {
        Self {
            alice: [0, 1],
            bob: [1, 0],
        }
    }
}

impl RoutingMap {
    pub fn new(alice: [u8; 2], bob: [u8; 2]) -> Result<Self> {
        for (name, m) in [("alice", alice), ("bob", bob)] {
            if m.iter().any(|&r| r > 1) || m[0] == m[1] {
                return Err(Error::InvalidArgument(format!(
                    "{name} routing {m:?} is not a bijection on {{0,1}}"
                )));
            }
        }
        Ok(Self { alice, bob })
    }

    pub fn alice(&self) -> [u8; 2] {
        self.alice
    }

    pub fn bob(&self) -> [u8; 2] {
        self.bob
    }

    pub fn inverse(&self) -> Self {
        let inv = |m: [u8; 2]| {
            let mut out = [0u8; 2];
            out[m[0] as usize] = 0;
            out[m[1] as usize] = 1;
            out
        };
        Self {
            alice: inv(self.alice),
            bob: inv(self.bob),
        }
    }

    fn operator(&self) -> CMatrix {
        let mut u = CMatrix::zeros(DIM, DIM);
        for i in 0..DIM {
            let ra = self.alice[Coordinate::FreqA.bit(i) as usize] as usize;
            let rb = self.bob[Coordinate::FreqB.bit(i) as usize] as usize;
            let j = i ^ (ra << Coordinate::RailA.shift()) ^ (rb << Coordinate::RailB.shift());
            u[(j, i)] = ONE;
        }
        u
    }
}

/// Frequency-dependent routing. The router XORs the mapped rail into the
/// existing rail bit, so on photons arriving in rail-1 it writes the route and
/// the operation stays unitary on the whole space.
pub fn wdm(rho: &DensityMatrix, routing: &RoutingMap) -> DensityMatrix {
    state::evolve(rho, &routing.operator())
}

/// Which photons an element acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parties {
    Alice,
    Bob,
    Both,
}

impl Parties {
    fn list(self) -> &'static [Party] {
        match self {
            Parties::Alice => &[Party::Alice],
            Parties::Bob => &[Party::Bob],
            Parties::Both => &[Party::Alice, Party::Bob],
        }
    }
}

impl From<Party> for Parties {
    fn from(p: Party) -> Self {
        match p {
            Party::Alice => Parties::Alice,
            Party::Bob => Parties::Bob,
        }
    }
}

/// Single-qubit gate `g` (row = output bit) on one coordinate.
pub(crate) fn local_gate(coordinate: Coordinate, g: [[Complex64; 2]; 2]) -> CMatrix {
    let mut u = CMatrix::zeros(DIM, DIM);
    let mask = coordinate.mask();
    for i in 0..DIM {
        let b = coordinate.bit(i) as usize;
        for (out, row) in g.iter().enumerate() {
            let v = row[b];
            if v != ZERO {
                let j = if out == 1 { i | mask } else { i & !mask };
                u[(j, i)] += v;
            }
        }
    }
    u
}

fn hadamard_gate() -> [[Complex64; 2]; 2] {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[s, s], [s, -s]]
}

fn pauli_x() -> [[Complex64; 2]; 2] {
    [[ZERO, ONE], [ONE, ZERO]]
}

/// Quarter-wave-plate Hadamard on polarization: H→(H+V)/√2, V→(H−V)/√2.
pub fn hadamard_pol(rho: &DensityMatrix, parties: Parties) -> DensityMatrix {
    parties.list().iter().fold(rho.clone(), |acc, &p| {
        state::evolve(&acc, &local_gate(Coordinate::new(Dof::Pol, p), hadamard_gate()))
    })
}

/// Bit flip `σx = |H⟩⟨V| + |V⟩⟨H|` on one photon.
pub fn sigma_x(rho: &DensityMatrix, party: Party) -> DensityMatrix {
    state::evolve(rho, &local_gate(Coordinate::new(Dof::Pol, party), pauli_x()))
}

/// Names the basis states a phase plate acts on: those where `coordinate`
/// reads `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseFlag {
    pub coordinate: Coordinate,
    pub value: u8,
}

impl PhaseFlag {
    pub fn new(coordinate: Coordinate, value: u8) -> Self {
        Self { coordinate, value }
    }
}

pub(crate) fn phase_operator(flag: PhaseFlag, phi: f64) -> CMatrix {
    let e = Complex64::from_polar(1.0, phi);
    CMatrix::from_fn(DIM, DIM, |i, j| {
        if i != j {
            ZERO
        } else if flag.coordinate.bit(i) == flag.value {
            e
        } else {
            ONE
        }
    })
}

/// Multiplies every amplitude whose flagged coordinate matches by `e^{iφ}`.
pub fn local_phase(rho: &DensityMatrix, flag: PhaseFlag, phi: f64) -> DensityMatrix {
    if phi == 0.0 {
        return rho.clone();
    }
    state::evolve(rho, &phase_operator(flag, phi))
}

/// Population below which a frequency configuration counts as empty.
pub const ERASE_TOL: f64 = 1e-12;

fn erase_operator() -> CMatrix {
    let freq = Coordinate::FreqA.mask() | Coordinate::FreqB.mask();
    let mut v = CMatrix::zeros(DIM, DIM);
    for i in 0..DIM {
        v[(i & !freq, i)] = ONE;
    }
    v
}

/// Coherent up-conversion of both photons to ω1.
///
/// Models the relabeling `|f⟩ → |ω1⟩` for each photon while keeping every
/// superposition phase. The map is an isometry on states whose frequency pair
/// is fixed by the polarization and rail coordinates, which is what the
/// purification pipeline produces after the frequency-routed QND. Any other
/// state still carries frequency distinguishability that cannot be erased
/// coherently and is rejected.
pub fn frequency_erase(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let freq = Coordinate::FreqA.mask() | Coordinate::FreqB.mask();
    // for each polarization/rail configuration, count populated frequency pairs
    let mut seen = [0u8; DIM];
    for i in 0..DIM {
        if rho.get(i, i).re > ERASE_TOL {
            seen[i & !freq] += 1;
        }
    }
    if let Some(i) = seen.iter().position(|&k| k > 1) {
        return Err(Error::InvalidState(format!(
            "frequency is not determined by the other coordinates at {}",
            crate::BasisLabel::from_index(i).expect("index < DIM")
        )));
    }
    Ok(DensityMatrix::from_raw(linalg::sandwich(&erase_operator(), rho.matrix())))
}

/// `V†V − I` for the erasure map; vanishes on the admissible subspace.
pub fn erase_isometry_defect(rho: &DensityMatrix) -> f64 {
    let v = erase_operator();
    let mut defect = linalg::gram(&v);
    for i in 0..DIM {
        defect[(i, i)] -= ONE;
    }
    let check = rho.matrix() * defect * rho.matrix();
    check.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Feed-forward corrections recorded on a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Correction {
    /// σx on one photon after unequal probe phases.
    SigmaX { party: Party },
    /// σx on both photons, aligning the branches where Alice read 0.
    SigmaXBoth,
    /// Rails moved back to rail-1 before the next stage.
    ResetRails { alice: u8, bob: u8 },
    /// Phase plate `e^{-iφ}` on Bob's V component.
    Compensate { phi: f64 },
}

/// Declarative optical element, serialized as `{element, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "element", content = "params", rename_all = "snake_case")]
pub enum Element {
    QndPbs {},
    Wdm(RoutingMap),
    Hadamard { parties: Parties },
    SigmaX { party: Party },
    LocalPhase { coordinate: Coordinate, value: u8, phi: f64 },
    FrequencyErase {},
    /// Rail reset driven by the previous QND outcome.
    ResetRails {},
    /// σx on `party` when the previous QND phases differ.
    CorrectBitFlip { party: Party },
    /// σx on both photons when Alice's previous phase was 0.
    FlipBothOnAliceZero {},
    CompensatePhase { phi: f64 },
}

/// A path through a pipeline: measurement record, corrections, final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub outcomes: Vec<QndOutcome>,
    pub corrections: Vec<Correction>,
    pub probability: f64,
    pub state: DensityMatrix,
}

impl Trajectory {
    pub fn start(state: DensityMatrix) -> Self {
        Self {
            outcomes: Vec::new(),
            corrections: Vec::new(),
            probability: 1.0,
            state,
        }
    }

    fn last_outcome(&self, element: &str) -> Result<QndOutcome> {
        self.outcomes.last().copied().ok_or_else(|| {
            Error::InvalidArgument(format!("{element} needs a preceding QND measurement"))
        })
    }
}

impl Element {
    /// Applies the element to one trajectory, splitting it on measurements.
    pub fn apply(&self, t: Trajectory) -> Result<Vec<Trajectory>> {
        let same = |t: Trajectory, state: DensityMatrix| Trajectory { state, ..t };
        Ok(match self {
            Element::QndPbs {} => qnd_pbs(&t.state)
                .into_iter()
                .map(|b| {
                    let mut outcomes = t.outcomes.clone();
                    outcomes.push(b.outcome);
                    Trajectory {
                        outcomes,
                        corrections: t.corrections.clone(),
                        probability: t.probability * b.probability,
                        state: b.state,
                    }
                })
                .collect(),
            Element::Wdm(map) => {
                let s = wdm(&t.state, map);
                vec![same(t, s)]
            }
            Element::Hadamard { parties } => {
                let s = hadamard_pol(&t.state, *parties);
                vec![same(t, s)]
            }
            Element::SigmaX { party } => {
                let s = sigma_x(&t.state, *party);
                vec![same(t, s)]
            }
            Element::LocalPhase {
                coordinate,
                value,
                phi,
            } => {
                if *value > 1 {
                    return Err(Error::InvalidArgument(format!("phase flag value {value} is not a bit")));
                }
                let s = local_phase(&t.state, PhaseFlag::new(*coordinate, *value), *phi);
                vec![same(t, s)]
            }
            Element::FrequencyErase {} => {
                let s = frequency_erase(&t.state)?;
                vec![same(t, s)]
            }
            Element::ResetRails {} => {
                let last = t.last_outcome("reset_rails")?;
                let mut s = t.state.clone();
                for (coord, bit) in [(Coordinate::RailA, last.alice_rail), (Coordinate::RailB, last.bob_rail)] {
                    if bit == 1 {
                        s = state::evolve(&s, &local_gate(coord, pauli_x()));
                    }
                }
                let mut t = same(t, s);
                t.corrections.push(Correction::ResetRails {
                    alice: last.alice_rail,
                    bob: last.bob_rail,
                });
                vec![t]
            }
            Element::CorrectBitFlip { party } => {
                let last = t.last_outcome("correct_bit_flip")?;
                if last.phases_equal() {
                    vec![t]
                } else {
                    let s = sigma_x(&t.state, *party);
                    let mut t = same(t, s);
                    t.corrections.push(Correction::SigmaX { party: *party });
                    vec![t]
                }
            }
            Element::FlipBothOnAliceZero {} => {
                let last = t.last_outcome("flip_both_on_alice_zero")?;
                if last.alice_phase == Phase::Theta {
                    vec![t]
                } else {
                    let s = sigma_x(&sigma_x(&t.state, Party::Alice), Party::Bob);
                    let mut t = same(t, s);
                    t.corrections.push(Correction::SigmaXBoth);
                    vec![t]
                }
            }
            Element::CompensatePhase { phi } => {
                let s = local_phase(&t.state, PhaseFlag::new(Coordinate::PolB, 1), -phi);
                let mut t = same(t, s);
                t.corrections.push(Correction::Compensate { phi: *phi });
                vec![t]
            }
        })
    }
}

/// Runs `elements` in order, branching on every QND element.
pub fn run_pipeline(initial: Trajectory, elements: &[Element]) -> Result<Vec<Trajectory>> {
    let mut frontier = vec![initial];
    for element in elements {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for t in frontier {
            next.extend(element.apply(t)?);
        }
        frontier = next;
    }
    Ok(frontier)
}

/// Dense copy of an element's unitary, for elements that have one.
pub fn element_unitary(element: &Element) -> Option<DMatrix<Complex64>> {
    match element {
        Element::Wdm(map) => Some(map.operator()),
        Element::Hadamard { parties } => Some(parties.list().iter().fold(
            CMatrix::identity(DIM, DIM),
            |acc, &p| local_gate(Coordinate::new(Dof::Pol, p), hadamard_gate()) * acc,
        )),
        Element::SigmaX { party } => Some(local_gate(Coordinate::new(Dof::Pol, *party), pauli_x())),
        Element::LocalPhase {
            coordinate,
            value,
            phi,
        } => Some(phase_operator(PhaseFlag::new(*coordinate, *value), *phi)),
        Element::CompensatePhase { phi } => {
            Some(phase_operator(PhaseFlag::new(Coordinate::PolB, 1), -phi))
        }
        _ => None,
    }
}
