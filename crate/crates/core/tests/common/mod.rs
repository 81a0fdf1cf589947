//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's evolution code: states are built by
//! explicit Kronecker products and measurements by direct bucket sorting of
//! amplitudes.

#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use hyperepp::{BellLabel, Complex64, DensityMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn cis(phi: f64) -> C {
    C::from_polar(1.0, phi)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-qubit vector from amplitudes on 00, 01, 10, 11.
pub fn pair(amps: [C; 4]) -> DVector<C> {
    DVector::from_row_slice(&amps)
}

pub fn bell(label: BellLabel) -> DVector<C> {
    let s = FRAC_1_SQRT_2;
    let z = c(0.0);
    pair(match label {
        BellLabel::PhiPlus => [c(s), z, z, c(s)],
        BellLabel::PhiMinus => [c(s), z, z, c(-s)],
        BellLabel::PsiPlus => [z, c(s), c(s), z],
        BellLabel::PsiMinus => [z, c(s), c(-s), z],
    })
}

/// `pol ⊗ freq ⊗ rail`, each a two-qubit (Alice, Bob) vector.
pub fn joint(pol: &DVector<C>, freq: &DVector<C>, rail: &DVector<C>) -> DVector<C> {
    pol.kronecker(freq).kronecker(rail)
}

/// `(|01⟩ + e^{iφ}|10⟩)/√2`.
pub fn freq_carrier(phi: f64) -> DVector<C> {
    let s = FRAC_1_SQRT_2;
    pair([c(0.0), c(s), cis(phi) * s, c(0.0)])
}

/// `(|00⟩ + e^{iφ}|11⟩)/√2`.
pub fn rail_carrier(phi: f64) -> DVector<C> {
    let s = FRAC_1_SQRT_2;
    pair([c(s), c(0.0), c(0.0), cis(phi) * s])
}

pub fn basis_pair(a: u8, b: u8) -> DVector<C> {
    let mut v = DVector::from_element(4, c(0.0));
    v[2 * a as usize + b as usize] = c(1.0);
    v
}

pub fn projector(v: &DVector<C>) -> DMatrix<C> {
    v * v.adjoint()
}

pub fn bell_diagonal(w: [f64; 4]) -> DMatrix<C> {
    BellLabel::ALL
        .iter()
        .zip(w)
        .map(|(l, p)| projector(&bell(*l)) * c(p))
        .fold(DMatrix::zeros(4, 4), |acc, m| acc + m)
}

pub fn max_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `|⟨v|ρ|v⟩|` for a normalized vector.
pub fn expectation(rho: &DMatrix<C>, v: &DVector<C>) -> f64 {
    (v.adjoint() * rho * v)[(0, 0)].re
}

/// Uniform point on the probability simplex.
pub fn random_simplex(r: &mut ChaCha8Rng) -> [f64; 4] {
    let e: Vec<f64> = (0..4).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    let mut w = [e[0] / s, e[1] / s, e[2] / s, 0.0];
    w[3] = 1.0 - w[0] - w[1] - w[2];
    if w[3] < 0.0 {
        w[3] = 0.0;
    }
    w
}

/// Pauli on Bob that turns Φ+ into the given Bell state, as a 2×2 matrix.
fn bob_pauli(label: BellLabel) -> [[C; 2]; 2] {
    let (o, z) = (c(1.0), c(0.0));
    match label {
        BellLabel::PhiPlus => [[o, z], [z, o]],
        BellLabel::PhiMinus => [[o, z], [z, -o]],
        BellLabel::PsiPlus => [[z, o], [o, z]],
        BellLabel::PsiMinus => [[z, -o], [o, z]],
    }
}

/// Polarization marginal after the spatial parity step with Bob's σx on
/// unequal outcomes, computed on the 16-dimensional (pol, rail) space.
///
/// Each basis term fires θ for a party when its polarization bit equals its
/// rail bit, then leaves on the rail named by the outcome. Terms are sorted
/// into outcome buckets; each bucket's unnormalized polarization vector adds
/// its own projector.
pub fn spatial_step_oracle(w: [f64; 4], dphi_s: f64) -> DMatrix<C> {
    let mut out = DMatrix::zeros(4, 4);
    for (label, weight) in BellLabel::ALL.iter().zip(w) {
        let p = bob_pauli(*label);
        // Pauli on Bob applied to Φ+ amplitudes
        let s = FRAC_1_SQRT_2;
        let mut pol = [c(0.0); 4];
        for (pa, amp) in [(0usize, c(s)), (1usize, c(s))] {
            let pb_in = pa;
            for pb in 0..2 {
                pol[2 * pa + pb] += amp * p[pb][pb_in];
            }
        }
        let rails = [c(s), c(0.0), c(0.0), cis(dphi_s) * s];
        let mut buckets = vec![[c(0.0); 4]; 4];
        for (pi, pamp) in pol.iter().enumerate() {
            for (ri, ramp) in rails.iter().enumerate() {
                let (pa, pb, ra, rb) = (pi >> 1, pi & 1, ri >> 1, ri & 1);
                let oa = (pa == ra) as usize;
                let ob = (pb == rb) as usize;
                buckets[2 * oa + ob][pi] += pamp * ramp;
            }
        }
        for (k, b) in buckets.iter().enumerate() {
            let (oa, ob) = (k >> 1, k & 1);
            let mut v = *b;
            if oa != ob {
                // σx on Bob: swap pol_B
                v = [b[1], b[0], b[3], b[2]];
            }
            let v = pair(v);
            out += projector(&v) * c(weight);
        }
    }
    out
}

/// Brute-force two-pair parity check on `F|Φ+⟩⟨Φ+| + (1−F)|Ψ+⟩⟨Ψ+|`.
///
/// Qubit order A1, B1, A2, B2. Alice keeps the event when the parity of her
/// two photons equals the parity of Bob's two. Pair 2 is then measured in the
/// ± basis on both sides, and Alice flips the phase of pair 1 when the two
/// results differ. Returns `(F', p_success)`.
pub fn two_pair_oracle(f: f64) -> (f64, f64) {
    let rho = projector(&bell(BellLabel::PhiPlus)) * c(f) + projector(&bell(BellLabel::PsiPlus)) * c(1.0 - f);
    let two = rho.kronecker(&rho);
    let bit = |i: usize, q: usize| (i >> (3 - q)) & 1;
    let keep = DMatrix::from_fn(16, 16, |i, j| {
        if i == j && (bit(i, 0) ^ bit(i, 2)) == (bit(i, 1) ^ bit(i, 3)) {
            c(1.0)
        } else {
            c(0.0)
        }
    });
    let kept = &keep * &two * &keep;
    let p: f64 = (0..16).map(|i| kept[(i, i)].re).sum();
    let s = FRAC_1_SQRT_2;
    let plus = DVector::from_row_slice(&[c(s), c(s)]);
    let minus = DVector::from_row_slice(&[c(s), c(-s)]);
    let id = DMatrix::<C>::identity(2, 2);
    let z = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let mut pair1 = DMatrix::<C>::zeros(4, 4);
    for (sa, va) in [(0, &plus), (1, &minus)] {
        for (sb, vb) in [(0, &plus), (1, &minus)] {
            // ⟨sa|_A2 ⟨sb|_B2 as a 4×16 map onto (A1, B1)
            let bra = va.kronecker(vb).adjoint();
            let m = DMatrix::<C>::identity(4, 4).kronecker(&bra);
            let mut r1 = &m * &kept * m.adjoint();
            if sa != sb {
                let corr = z.kronecker(&id);
                r1 = &corr * r1 * corr.adjoint();
            }
            pair1 += r1;
        }
    }
    let f_new = expectation(&pair1, &bell(BellLabel::PhiPlus)) / p;
    (f_new, p)
}

/// Composite Simpson estimate of `(1/T)∫₀ᵀ (1 + cos g(t))/2 dt`.
pub fn simpson_ff(g: impl Fn(f64) -> f64, horizon: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = horizon / intervals as f64;
    let f = |t: f64| 0.5 * (1.0 + g(t).cos());
    let mut s = f(0.0) + f(horizon);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    s * h / 3.0 / horizon
}

/// Overlap of the fiber-transmitted state with its product approximation,
/// using absolute phases on every term.
pub fn fiber_overlap_oracle(l: [f64; 4], w1: f64, w2: f64, v: f64) -> f64 {
    let [la1, la2, lb1, lb2] = l;
    let exact = [
        (w1 * la1 + w2 * lb1) / v,
        (w2 * la1 + w1 * lb1) / v,
        (w1 * la2 + w2 * lb2) / v,
        (w2 * la2 + w1 * lb2) / v,
    ];
    let global = (w1 * la1 + w2 * lb1) / v;
    let f = ((w2 - w1) * la1 + (w1 - w2) * lb1) / v;
    let s = (w1 * (la2 - la1) + w2 * (lb2 - lb1)) / v;
    let product = [global, global + f, global + s, global + f + s];
    let inner: C = exact
        .iter()
        .zip(product)
        .map(|(e, p)| cis(p).conj() * cis(*e) * 0.25)
        .sum();
    inner.norm_sqr()
}

/// Random density matrix of rank ≤ `rank` on the full space.
pub fn random_state(r: &mut ChaCha8Rng, rank: usize) -> DensityMatrix {
    random_state_on(r, rank, |_| true)
}

/// Random density matrix supported on basis indices where `allowed` holds.
pub fn random_state_on(r: &mut ChaCha8Rng, rank: usize, allowed: impl Fn(usize) -> bool) -> DensityMatrix {
    let n = hyperepp::DIM;
    let mut m = DMatrix::<C>::zeros(n, n);
    for _ in 0..rank {
        let v = DVector::from_fn(n, |i, _| {
            if allowed(i) {
                C::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
            } else {
                c(0.0)
            }
        });
        m += &v * v.adjoint();
    }
    let tr: C = (0..n).map(|i| m[(i, i)]).sum();
    m /= tr;
    // symmetrize away rounding
    let m = (&m + m.adjoint()) * c(0.5);
    DensityMatrix::from_matrix(m).expect("random state is valid")
}

/// Random unitary on `n` dimensions from Gram-Schmidt on a complex matrix.
pub fn random_unitary(r: &mut ChaCha8Rng, n: usize) -> DMatrix<C> {
    let m = DMatrix::from_fn(n, n, |_, _| C::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    m.qr().q()
}

pub fn assert_valid(rho: &DensityMatrix, what: &str) {
    if let Err(e) = rho.check_invariants() {
        panic!("{what}: {e}");
    }
}
