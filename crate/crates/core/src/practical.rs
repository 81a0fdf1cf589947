//! Transmission with phase dispersion: the bit-flip fidelity law, phase
//! compensation, time-fluctuating frequency phase, fiber-length
//! factorization, and formula-vs-simulation sweeps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{anticorrelated_pair, pair_ket, product_vector, BasisLabel, BellLabel, Coordinate, DIM, ZERO};
use crate::epp::{self, check_simplex, error_branch, source_state, Mode, NoiseModel, PurificationReport};
use crate::error::{Error, Result};
use crate::optics::{self, Element, PhaseFlag, QndOutcome, RoutingMap, Stage, Trajectory};
use crate::state::{self, make_pure, DensityMatrix};

/// `[1 + (a+c−b−d)·cos Δφ_s]/2`.
pub fn bitflip_fidelity_formula(a: f64, b: f64, c: f64, d: f64, dphi_s: f64) -> Result<f64> {
    check_simplex(a, b, c, d)?;
    Ok(0.5 * (1.0 + (a + c - b - d) * dphi_s.cos()))
}

/// Phase plate `e^{-iφ}` on Bob's V component.
pub fn compensate_phase(rho: &DensityMatrix, phi: f64) -> DensityMatrix {
    optics::local_phase(rho, PhaseFlag::new(Coordinate::PolB, 1), -phi)
}

/// Shape of `Δφ_f(t)` around its starting value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluctuationModel {
    Constant,
    /// Sweeps the deviation linearly across `[−δ, δ]` over the horizon, so
    /// the time average equals the uniform average over that interval.
    UniformJitter { delta: f64 },
    Sinusoid { amplitude: f64, period: f64 },
    /// Absolute values of `Δφ_f` at equally spaced times.
    UserSeries { values: Vec<f64> },
}

/// Time dependence of the frequency phase over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationSpec {
    pub model: FluctuationModel,
    /// `Δφ_f(0)`, the value the compensation plate is set to.
    #[serde(default)]
    pub base: f64,
    pub horizon: f64,
    /// Sample count for the built-in models; a user series sets its own.
    pub samples: usize,
}

impl FluctuationSpec {
    pub fn new(model: FluctuationModel, base: f64, horizon: f64, samples: usize) -> Result<Self> {
        let s = Self {
            model,
            base,
            horizon,
            samples,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("fluctuation horizon must be positive");
        }
        if self.samples < 1 {
            return bad("fluctuation needs at least one sample");
        }
        if !self.base.is_finite() {
            return bad("fluctuation base must be finite");
        }
        match &self.model {
            FluctuationModel::Constant => {}
            FluctuationModel::UniformJitter { delta } => {
                if !(*delta >= 0.0 && delta.is_finite()) {
                    return bad("jitter delta must be finite and nonnegative");
                }
            }
            FluctuationModel::Sinusoid { amplitude, period } => {
                if !amplitude.is_finite() || !(*period > 0.0 && period.is_finite()) {
                    return bad("sinusoid needs finite amplitude and positive period");
                }
            }
            FluctuationModel::UserSeries { values } => {
                if values.is_empty() {
                    return bad("user series is empty");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("user series contains non-finite values");
                }
            }
        }
        Ok(())
    }

    fn count(&self) -> usize {
        match &self.model {
            FluctuationModel::UserSeries { values } => values.len(),
            _ => self.samples,
        }
    }

    /// `Δ_f(t_k) = Δφ_f(t_k) − Δφ_f(0)` at equally spaced times.
    pub fn deviations(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.count();
        let t = |k: usize| {
            if n == 1 {
                0.0
            } else {
                self.horizon * k as f64 / (n - 1) as f64
            }
        };
        Ok((0..n)
            .map(|k| match &self.model {
                FluctuationModel::Constant => 0.0,
                FluctuationModel::UniformJitter { delta } => {
                    if n == 1 {
                        0.0
                    } else {
                        delta * (2.0 * t(k) / self.horizon - 1.0)
                    }
                }
                FluctuationModel::Sinusoid { amplitude, period } => amplitude * (2.0 * PI * t(k) / period).sin(),
                FluctuationModel::UserSeries { values } => values[k] - self.base,
            })
            .collect())
    }

    /// Trapezoid weights over the sample times, summing to 1.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.count();
        if n == 1 {
            return vec![1.0];
        }
        let h = 1.0 / (n - 1) as f64;
        (0..n)
            .map(|k| if k == 0 || k == n - 1 { h / 2.0 } else { h })
            .collect()
    }

    /// Absolute `Δφ_f` values with their time weights.
    pub fn phase_samples(&self) -> Result<Vec<(f64, f64)>> {
        Ok(self
            .deviations()?
            .into_iter()
            .zip(self.weights())
            .map(|(dev, w)| (self.base + dev, w))
            .collect())
    }
}

/// Time-averaged fidelity and the resulting Bell-diagonal ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct FfResult {
    pub f_f: f64,
    pub samples: usize,
    /// `F_f|Φ+⟩⟨Φ+| + (1−F_f)|Φ−⟩⟨Φ−|` over {HH, HV, VH, VV}.
    #[serde(serialize_with = "serialize_dump")]
    pub ensemble: DMatrix<Complex64>,
}

fn serialize_dump<S: serde::Serializer>(m: &DMatrix<Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    state::StateDump::from_matrix(m).serialize(s)
}

/// `F_f = (1/2T)∫(1 + cos Δ_f(t))dt` by the trapezoid rule over the samples.
pub fn time_avg_ff(spec: &FluctuationSpec) -> Result<FfResult> {
    let f_f = match spec.model {
        FluctuationModel::Constant => {
            spec.validate()?;
            1.0
        }
        _ => spec
            .deviations()?
            .iter()
            .zip(spec.weights())
            .map(|(dev, w)| w * 0.5 * (1.0 + dev.cos()))
            .sum::<f64>()
            .clamp(0.0, 1.0),
    };
    let plus = BellLabel::PhiPlus.vector();
    let minus = BellLabel::PhiMinus.vector();
    let ensemble = &plus * plus.adjoint() * Complex64::new(f_f, 0.0)
        + &minus * minus.adjoint() * Complex64::new(1.0 - f_f, 0.0);
    Ok(FfResult {
        f_f,
        samples: spec.count(),
        ensemble,
    })
}

/// Channel lengths of the four spatial modes and the two carrier frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberGeometry {
    pub l_a1: f64,
    pub l_a2: f64,
    pub l_b1: f64,
    pub l_b2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub v: f64,
}

impl FiberGeometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.l_a1, self.l_a2, self.l_b1, self.l_b2];
        if lengths.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("lengths {lengths:?} must be finite and nonnegative")));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::InvalidArgument("propagation speed must be positive".into()));
        }
        if !self.omega1.is_finite() || !self.omega2.is_finite() || self.omega1 == self.omega2 {
            return Err(Error::InvalidArgument("omega1 and omega2 must be finite and distinct".into()));
        }
        Ok(())
    }

    /// Phase of the term with Alice at `fa`, Bob at `fb` (0 = ω1) on rail `r`.
    fn term_phase(&self, fa: u8, fb: u8, r: u8) -> f64 {
        let w = |f: u8| if f == 0 { self.omega1 } else { self.omega2 };
        let (la, lb) = if r == 0 { (self.l_a1, self.l_b1) } else { (self.l_a2, self.l_b2) };
        (w(fa) * la + w(fb) * lb) / self.v
    }
}

/// Exact versus product form of the fiber-transmitted frequency/spatial state.
#[derive(Debug, Clone, Serialize)]
pub struct Factorization {
    /// Amplitudes over (ω1ω2, a1b1), (ω2ω1, a1b1), (ω1ω2, a2b2), (ω2ω1, a2b2),
    /// with the common phase of the first term removed.
    pub exact: Vec<Complex64>,
    pub factorized: Vec<Complex64>,
    pub overlap: f64,
    /// Frequency and spatial phases of the product form.
    pub dphi_f: f64,
    pub dphi_s: f64,
    /// Phase of the last term missing from the product form.
    pub residual_phase: f64,
    /// `[2(ω2La2+ω1Lb2) − ω2La1 − ω1Lb1 − ω1(La2−La1) − ω2(Lb2−Lb1)]/v`.
    pub condition: f64,
}

const TERMS: [(u8, u8, u8); 4] = [(0, 1, 0), (1, 0, 0), (0, 1, 1), (1, 0, 1)];

pub fn factorization_overlap(g: &FiberGeometry) -> Result<Factorization> {
    g.validate()?;
    let reference = g.term_phase(0, 1, 0);
    let exact: Vec<Complex64> = TERMS
        .iter()
        .map(|&(fa, fb, r)| Complex64::from_polar(0.5, g.term_phase(fa, fb, r) - reference))
        .collect();
    let dphi_f = g.term_phase(1, 0, 0) - reference;
    let dphi_s = g.term_phase(0, 1, 1) - reference;
    let factorized: Vec<Complex64> = TERMS
        .iter()
        .map(|&(fa, _, r)| Complex64::from_polar(0.5, fa as f64 * dphi_f + r as f64 * dphi_s))
        .collect();
    let inner: Complex64 = factorized.iter().zip(&exact).map(|(f, e)| f.conj() * e).sum();
    let residual_phase =
        (g.omega2 - g.omega1) * ((g.l_a2 - g.l_a1) - (g.l_b2 - g.l_b1)) / g.v;
    let condition = (2.0 * (g.omega2 * g.l_a2 + g.omega1 * g.l_b2)
        - g.omega2 * g.l_a1
        - g.omega1 * g.l_b1
        - g.omega1 * (g.l_a2 - g.l_a1)
        - g.omega2 * (g.l_b2 - g.l_b1))
        / g.v;
    Ok(Factorization {
        exact,
        factorized,
        overlap: inner.norm_sqr().clamp(0.0, 1.0),
        dphi_f,
        dphi_s,
        residual_phase,
        condition,
    })
}

/// `|3 + e^{iε}|²/16`, the overlap when one of four terms is off by `ε`.
pub fn residual_overlap(epsilon: f64) -> f64 {
    (Complex64::new(3.0, 0.0) + Complex64::from_polar(1.0, epsilon)).norm_sqr() / 16.0
}

/// A quoted branch state and how well the simulation reproduces it.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub stage: Stage,
    pub modes: String,
    pub outcome: QndOutcome,
    /// Polarization Bell state entering the step.
    pub input: BellLabel,
    pub probability: f64,
    pub fidelity: f64,
}

fn step1_expected(class: BellLabel, outcome: QndOutcome, dphi_s: f64, dphi_f: f64) -> DVector<Complex64> {
    let s = FRAC_1_SQRT_2;
    let e = Complex64::from_polar(s, dphi_s);
    let one = Complex64::new(s, 0.0);
    let sign = match class {
        BellLabel::PhiMinus | BellLabel::PsiMinus => -1.0,
        _ => 1.0,
    };
    // rail-2 outcome puts the dispersion phase on the second term, rail-1 on the first
    let (first, second) = if outcome.alice_rail == 1 { (one, e * sign) } else { (e, one * sign) };
    let mut pol = [ZERO; 4];
    match class {
        BellLabel::PhiPlus | BellLabel::PhiMinus => {
            pol[0] = first;
            pol[3] = second;
        }
        BellLabel::PsiPlus | BellLabel::PsiMinus => {
            pol[1] = first;
            pol[2] = second;
        }
    }
    product_vector(&pol, &anticorrelated_pair(dphi_f), &pair_ket(outcome.alice_rail, outcome.bob_rail))
}

fn step2_expected(outcome: QndOutcome, dphi_f: f64) -> DVector<Complex64> {
    let s = FRAC_1_SQRT_2;
    let e = Complex64::from_polar(s, dphi_f);
    let one = Complex64::new(s, 0.0);
    // (pol, freq) pairs of the two terms; the ω2-on-Alice term carries e^{iΔφ_f}
    let terms: [((u8, u8), (u8, u8)); 2] = match (outcome.alice_rail, outcome.bob_rail) {
        (1, 1) => [((0, 0), (0, 1)), ((1, 1), (1, 0))],
        (0, 0) => [((0, 0), (1, 0)), ((1, 1), (0, 1))],
        (1, 0) => [((0, 1), (0, 1)), ((1, 0), (1, 0))],
        _ => [((0, 1), (1, 0)), ((1, 0), (0, 1))],
    };
    let mut v = DVector::from_element(DIM, ZERO);
    for (pol, freq) in terms {
        let amp = if freq.0 == 1 { e } else { one };
        v[BasisLabel::new(pol, freq, (outcome.alice_rail, outcome.bob_rail)).index()] = amp;
    }
    v
}

/// Reproduces the eight quoted branch states: four QND outcomes of the
/// spatial step (each for two error classes) and four of the frequency step.
pub fn branch_catalog(dphi_s: f64, dphi_f: f64) -> Result<Vec<CatalogEntry>> {
    let mut out = Vec::new();
    let source = source_state();
    for class in BellLabel::ALL {
        let rho = error_branch(&source, class, dphi_s, dphi_f);
        for b in optics::qnd_pbs(&rho) {
            let expected = step1_expected(class, b.outcome, dphi_s, dphi_f);
            out.push(CatalogEntry {
                stage: Stage::Spatial,
                modes: b.outcome.modes(Stage::Spatial),
                outcome: b.outcome,
                input: class,
                probability: b.probability,
                fidelity: state::fidelity(&b.state, &expected)?,
            });
        }
    }
    for input in [BellLabel::PhiPlus, BellLabel::PsiPlus] {
        let v = product_vector(&input.amplitudes(), &anticorrelated_pair(dphi_f), &pair_ket(0, 0));
        let start = Trajectory::start(make_pure(v.as_slice())?);
        let elements = [Element::Wdm(RoutingMap::default()), Element::QndPbs {}];
        for t in optics::run_pipeline(start, &elements)? {
            let outcome = t.outcomes[0];
            out.push(CatalogEntry {
                stage: Stage::Frequency,
                modes: outcome.modes(Stage::Frequency),
                outcome,
                input,
                probability: t.probability,
                fidelity: state::fidelity(&t.state, &step2_expected(outcome, dphi_f))?,
            });
        }
    }
    Ok(out)
}

/// Tolerance for catalog agreement in [`dispersive_epp_run`].
pub const CATALOG_TOL: f64 = 1e-12;

/// Full protocol under dispersion. With compensation on, the final plate
/// removes `Δφ_f(0)`.
pub fn dispersive_epp_run(n: &NoiseModel, compensation: bool, mode: Mode) -> Result<PurificationReport> {
    n.validate()?;
    for e in branch_catalog(n.dphi_s, n.dphi_f)? {
        if (e.fidelity - 1.0).abs() > CATALOG_TOL {
            return Err(Error::ContractViolation(format!(
                "branch {} from {} deviates from its closed form (fidelity {})",
                e.modes, e.input, e.fidelity
            )));
        }
    }
    let phi = n.fluctuation.as_ref().map_or(n.dphi_f, |f| f.base);
    epp::run_epp_with(n, mode, compensation.then_some(phi))
}

/// One row of a formula-versus-simulation sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub dphi_s: f64,
    pub dphi_f: f64,
    #[serde(rename = "F_formula")]
    pub f_formula: f64,
    #[serde(rename = "F_simulated")]
    pub f_simulated: f64,
    pub abs_error: f64,
}

/// Compares the bit-flip fidelity law with the simulated step-1 marginal.
pub fn sweep_point(weights: [f64; 4], dphi_s: f64, dphi_f: f64) -> Result<SweepRow> {
    let [a, b, c, d] = weights;
    let n = NoiseModel::new(a, b, c, d)?.with_dispersion(dphi_s, dphi_f);
    let f_formula = bitflip_fidelity_formula(a, b, c, d, dphi_s)?;
    let f_simulated = epp::bitflip_marginal(&n)?.fidelity(&BellLabel::PhiPlus.vector())?;
    Ok(SweepRow {
        a,
        b,
        c,
        d,
        dphi_s,
        dphi_f,
        f_formula,
        f_simulated,
        abs_error: (f_formula - f_simulated).abs(),
    })
}

/// Every weight vector crossed with every `dphi_s`, in that nesting order.
pub fn sweep(points: &[[f64; 4]], dphi_s: &[f64], dphi_f: f64) -> Result<Vec<SweepRow>> {
    let jobs: Vec<([f64; 4], f64)> = points
        .iter()
        .flat_map(|p| dphi_s.iter().map(move |s| (*p, *s)))
        .collect();
    jobs.par_iter().map(|&(p, s)| sweep_point(p, s, dphi_f)).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `steps` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Error::InvalidArgument("linspace needs finite bounds and steps >= 1".into()));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    Ok((0..steps)
        .map(|k| from + (to - from) * k as f64 / (steps - 1) as f64)
        .collect())
}

/// `n³` points on the probability simplex by stick-breaking with `n` values
/// per axis in `[0, 1]`.
pub fn simplex_grid(n: usize) -> Result<Vec<[f64; 4]>> {
    if n < 2 {
        return Err(Error::InvalidArgument("simplex grid needs at least 2 values per axis".into()));
    }
    let axis = linspace(0.0, 1.0, n)?;
    let mut out = Vec::with_capacity(n * n * n);
    for &u1 in &axis {
        for &u2 in &axis {
            for &u3 in &axis {
                let a = u1;
                let b = (1.0 - u1) * u2;
                let c = (1.0 - u1) * (1.0 - u2) * u3;
                let d = (1.0 - u1) * (1.0 - u2) * (1.0 - u3);
                out.push([a, b, c, d]);
            }
        }
    }
    Ok(out)
}
