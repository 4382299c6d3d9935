//! Seeded generators for random test instances (property suites, oracles).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{max_real_eigenvalue, skew, sym, Matrix};
use crate::model::{LqoSystem, RomPoint};

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1]`.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> Matrix {
    sym(&random_matrix(rng, n, n))
}

pub fn random_skew(rng: &mut impl Rng, n: usize) -> Matrix {
    skew(&random_matrix(rng, n, n))
}

/// SPD with eigenvalues bounded below by 0.5.
pub fn random_spd(rng: &mut impl Rng, n: usize) -> Matrix {
    let w = random_matrix(rng, n, n);
    sym(&(&w * w.transpose() / n as f64 + Matrix::identity(n, n) * 0.5))
}

/// General (non-normal) Hurwitz matrix with spectral abscissa in `[-1.5, -0.5]`.
pub fn random_stable(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    let abscissa = max_real_eigenvalue(&g).expect("finite random matrix");
    let margin = rng.gen_range(0.5..=1.5);
    g - Matrix::identity(n, n) * (abscissa + margin)
}

pub fn random_lqo_system(rng: &mut impl Rng, n: usize, m: usize) -> LqoSystem {
    LqoSystem::new(
        random_stable(rng, n),
        random_matrix(rng, n, m),
        random_matrix(rng, 1, n),
        random_symmetric(rng, n),
        0.0,
    )
    .expect("random stable system is valid")
}

pub fn random_rom_point(rng: &mut impl Rng, r: usize, m: usize) -> RomPoint {
    RomPoint::new(
        random_skew(rng, r),
        random_spd(rng, r),
        random_matrix(rng, r, m),
        random_matrix(rng, 1, r),
        random_symmetric(rng, r),
    )
    .expect("random point lies on the manifold")
}
