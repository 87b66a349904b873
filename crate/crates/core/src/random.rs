//! Seeded random generators for states, unitaries and channels.
//!
//! All randomness goes through [`ChaCha8Rng`], so a given seed produces the
//! same objects on every platform. Sweeps derive one generator per trial from
//! `(seed, trial index)` with [`trial_rng`], keeping trials independent of
//! evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::linalg::{CMatrix, Complex64};
use crate::quantum::{PureState, Unitary};

pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over `(seed, index)`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(seed: u64, index: u64) -> SimRng {
    rng(trial_seed(seed, index))
}

fn gaussian(rng: &mut SimRng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rng: &mut SimRng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary (Gram–Schmidt on a Ginibre matrix, two passes).
pub fn random_unitary(rng: &mut SimRng, n: usize) -> Unitary {
    let g = ginibre(rng, n, n);
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|c| g.column(c)).collect();
    for k in 0..n {
        for _ in 0..2 {
            for prev in 0..k {
                let proj: Complex64 = cols[prev]
                    .iter()
                    .zip(&cols[k])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let p = cols[prev].clone();
                for (x, q) in cols[k].iter_mut().zip(&p) {
                    *x -= proj * q;
                }
            }
        }
        let norm = cols[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in &mut cols[k] {
            *x /= norm;
        }
    }
    let m = CMatrix::from_fn(n, n, |r, c| cols[c][r]);
    Unitary::new(m).expect("Gram-Schmidt output is unitary")
}

/// Haar-random pure state.
pub fn random_pure(rng: &mut SimRng, n: usize) -> PureState {
    let amps: Vec<Complex64> = (0..n).map(|_| gaussian(rng)).collect();
    PureState::normalized(amps).expect("Gaussian vector is nonzero")
}

/// Full-rank random density matrix `G G† / Tr(G G†)` (Hilbert–Schmidt measure).
pub fn random_density(rng: &mut SimRng, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    let m = (&g * &g.adjoint()).hermitize();
    let tr = m.trace().re;
    m.scale_real(1.0 / tr)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(rng: &mut SimRng, n: usize) -> CMatrix {
    ginibre(rng, n, n).hermitize()
}

/// Uniform point on the probability simplex.
pub fn random_probs(rng: &mut SimRng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Kraus operators of a random trace-preserving channel on dimension `d`,
/// cut from a Haar isometry `d → d·n_kraus`.
pub fn random_channel(rng: &mut SimRng, d: usize, n_kraus: usize) -> Vec<CMatrix> {
    let u = random_unitary(rng, d * n_kraus);
    (0..n_kraus)
        .map(|i| CMatrix::from_fn(d, d, |a, b| u.matrix()[(i * d + a, b)]))
        .collect()
}

/// Random distinct alphabet of `n` states in dimension `n`.
pub fn random_alphabet_states(rng: &mut SimRng, n: usize) -> Vec<PureState> {
    (0..n).map(|_| random_pure(rng, n)).collect()
}
