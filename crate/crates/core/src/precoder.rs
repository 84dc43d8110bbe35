//! Orthogonal circulant transform (OCT) and its row-truncated
//! non-orthogonal matrix (NOM).
//!
//! The OCT is the circulant matrix whose first row is a unit-modulus CAZAC
//! sequence scaled by `1/sqrt(n)`. A circulant is unitary exactly when the
//! DFT of its generating row has constant modulus, which is the CAZAC
//! property. Keeping the first `m` rows of that matrix squeezes `n`
//! symbols onto `m` subcarriers; the resulting `m x n` matrix has
//! orthonormal rows and its Gram matrix is the projector seen by the
//! detector.

use crate::error::{check_len, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Zadoff-Chu sequence of length `n` with the given root.
///
/// Uses `exp(-i pi u k^2 / n)` for even `n` and `exp(-i pi u k (k+1) / n)`
/// for odd `n`; both are CAZAC whenever `gcd(u, n) = 1`.
pub fn zadoff_chu(root: usize, n: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Config("Zadoff-Chu length must be at least 1".into()));
    }
    if gcd(root, n) != 1 {
        return Err(Error::Config(format!(
            "Zadoff-Chu root {root} is not coprime with length {n}"
        )));
    }
    let (u, len) = (root as u128, n as u128);
    Ok((0..len)
        .map(|k| {
            // reduce the phase numerator modulo 2n before going to floating point
            let num = if n.is_multiple_of(2) { u * k * k } else { u * k * (k + 1) };
            let phase = -PI * ((num % (2 * len)) as f64) / n as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect())
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Circulant matrix with `first_row` as row 0; row `r` is row 0 cyclically
/// shifted right by `r`.
pub fn circulant(first_row: &[Complex64]) -> DMatrix<Complex64> {
    let n = first_row.len();
    DMatrix::from_fn(n, n, |r, c| first_row[(c + n - r) % n])
}

/// `n x n` OCT built from the root-1 Zadoff-Chu sequence.
pub fn make_oct(n: usize) -> Result<DMatrix<Complex64>> {
    if n == 0 {
        return Err(Error::Config("OCT size must be at least 1".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let row: Vec<Complex64> = zadoff_chu(1, n)?.into_iter().map(|z| z * scale).collect();
    Ok(circulant(&row))
}

/// Largest deviation of `u * u^H` from the identity.
pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    let prod = u * u.adjoint();
    let n = prod.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..prod.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((prod[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Row-truncated orthogonal precoder for one sub-band.
#[derive(Debug, Clone, PartialEq)]
pub struct NomMatrix {
    n: usize,
    m: usize,
    entries: DMatrix<Complex64>,
    gram: DMatrix<Complex64>,
}

impl NomMatrix {
    /// First `m` rows of the `n x n` OCT.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::Config(format!(
                "compressed size m={m} must satisfy 1 <= m <= n={n}"
            )));
        }
        Self::from_orthogonal(&make_oct(n)?, m)
    }

    /// Keeps the first `m` rows of an arbitrary unitary matrix. This is the
    /// hook for precoder families other than the OCT.
    pub fn from_orthogonal(u: &DMatrix<Complex64>, m: usize) -> Result<Self> {
        let n = u.nrows();
        if u.ncols() != n {
            return Err(Error::Config(format!(
                "precoder generator must be square, got {}x{}",
                n,
                u.ncols()
            )));
        }
        if m == 0 || m > n {
            return Err(Error::Config(format!(
                "compressed size m={m} must satisfy 1 <= m <= n={n}"
            )));
        }
        let err = unitarity_error(u);
        if err > 1e-9 {
            return Err(Error::Integrity(format!(
                "precoder generator is not unitary (deviation {err:e})"
            )));
        }
        let entries = u.rows(0, m).into_owned();
        let gram = entries.adjoint() * &entries;
        Ok(Self {
            n,
            m,
            entries,
            gram,
        })
    }

    /// Original symbols per band.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Occupied subcarriers per band.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Effective compression factor `m / n`.
    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// The `m x n` precoding matrix.
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Interference matrix `A^H A` (`n x n`).
    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    /// `A s`: squeezes `n` symbols onto `m` subcarriers.
    pub fn precode(&self, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("precoder input", self.n, symbols.len())?;
        let s = DVector::from_column_slice(symbols);
        Ok((&self.entries * s).as_slice().to_vec())
    }

    /// `A^H a`: maps `m` subcarrier values back to `n` soft symbol values.
    pub fn inverse_precode(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("inverse precoder input", self.m, coeffs.len())?;
        let a = DVector::from_column_slice(coeffs);
        Ok((self.entries.adjoint() * a).as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rustfft::FftPlanner;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn size_one_is_identity() {
        let u = make_oct(1).unwrap();
        assert_eq!(u.nrows(), 1);
        assert!((u[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(matches!(make_oct(0), Err(Error::Config(_))));
        assert!(matches!(zadoff_chu(2, 4), Err(Error::Config(_))));
    }

    #[test]
    fn oct4_unitary_and_circulant() {
        let u = make_oct(4).unwrap();
        assert!(unitarity_error(&u) < 1e-12);
        for r in 1..4 {
            for c in 0..4 {
                assert!((u[(r, c)] - u[(0, (c + 4 - r) % 4)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn generator_has_flat_dft() {
        for n in [40, 39, 120, 24] {
            let u = make_oct(n).unwrap();
            let mut row: Vec<Complex64> = (0..n).map(|c| u[(0, c)]).collect();
            FftPlanner::new().plan_fft_forward(n).process(&mut row);
            for v in row {
                assert!((v.norm() - 1.0).abs() < 1e-10, "n={n}");
            }
            assert!(unitarity_error(&u) < 1e-10);
        }
    }

    #[test]
    fn nom_without_truncation_has_identity_gram() {
        let nom = NomMatrix::new(4, 4).unwrap();
        let id = DMatrix::<Complex64>::identity(4, 4);
        assert!((nom.gram() - id).norm() < 1e-12);
    }

    #[test]
    fn nom_40_36() {
        let nom = NomMatrix::new(40, 36).unwrap();
        assert_eq!(nom.entries().shape(), (36, 40));
        assert!((nom.alpha() - 0.9).abs() < 1e-15);
        assert!((nom.gram().trace().re - 36.0).abs() < 1e-8);
        // rows orthonormal
        let rr = nom.entries() * nom.entries().adjoint();
        assert!((rr - DMatrix::<Complex64>::identity(36, 36)).norm() < 1e-10);
        // Hermitian projector
        let g = nom.gram();
        assert!((g - g.adjoint()).norm() < 1e-12);
        assert!((g * g - g).norm() < 1e-8);
    }

    #[test]
    fn nom_2_1_is_rank_one() {
        let nom = NomMatrix::new(2, 1).unwrap();
        let eig = nom.gram().clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        assert!(vals[0].abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_m() {
        assert!(matches!(NomMatrix::new(4, 5), Err(Error::Config(_))));
        assert!(matches!(NomMatrix::new(4, 0), Err(Error::Config(_))));
    }

    #[test]
    fn precode_basis_probe_and_zero() {
        let nom = NomMatrix::new(4, 3).unwrap();
        let mut e0 = vec![Complex64::new(0.0, 0.0); 4];
        assert_eq!(nom.precode(&e0).unwrap(), vec![Complex64::new(0.0, 0.0); 3]);
        assert_eq!(
            nom.inverse_precode(&[Complex64::new(0.0, 0.0); 3]).unwrap(),
            vec![Complex64::new(0.0, 0.0); 4]
        );
        e0[0] = Complex64::new(1.0, 0.0);
        let col = nom.precode(&e0).unwrap();
        for r in 0..3 {
            assert!((col[r] - nom.entries()[(r, 0)]).norm() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch_is_framing_error() {
        let nom = NomMatrix::new(4, 3).unwrap();
        assert!(matches!(nom.precode(&[Complex64::new(1.0, 0.0); 3]), Err(Error::Framing { .. })));
        assert!(matches!(
            nom.inverse_precode(&[Complex64::new(1.0, 0.0); 4]),
            Err(Error::Framing { .. })
        ));
    }

    #[test]
    fn noiseless_loop_applies_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nom = NomMatrix::new(4, 3).unwrap();
        let s = random_vec(&mut rng, 4);
        let back = nom.inverse_precode(&nom.precode(&s).unwrap()).unwrap();
        // explicit triple loop for G s
        let a = nom.entries();
        let expected: Vec<Complex64> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| (0..3).map(|r| a[(r, i)].conj() * a[(r, j)]).sum::<Complex64>() * s[j])
                    .sum()
            })
            .collect();
        assert!(max_abs_diff(&back, &expected) < 1e-12);
    }

    #[test]
    fn untruncated_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 7, 40] {
            let nom = NomMatrix::new(n, n).unwrap();
            let s = random_vec(&mut rng, n);
            let back = nom.inverse_precode(&nom.precode(&s).unwrap()).unwrap();
            assert!(max_abs_diff(&back, &s) < 1e-10);
        }
    }

    #[test]
    fn rejects_non_unitary_generator() {
        let u = DMatrix::from_element(3, 3, Complex64::new(1.0, 0.0));
        assert!(matches!(NomMatrix::from_orthogonal(&u, 2), Err(Error::Integrity(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn energy_non_expansion(seed in any::<u64>(), n in 1usize..24, cut in 0usize..6) {
                let m = n.saturating_sub(cut).max(1);
                let nom = NomMatrix::new(n, m).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_vec(&mut rng, n);
                let a = nom.precode(&s).unwrap();
                let es: f64 = s.iter().map(|x| x.norm_sqr()).sum();
                let ea: f64 = a.iter().map(|x| x.norm_sqr()).sum();
                prop_assert!(ea <= es * (1.0 + 1e-12));
                if m == n {
                    prop_assert!((ea - es).abs() < 1e-9 * es.max(1.0));
                }
                // vectors in the row space keep their energy
                let row_space = nom.inverse_precode(&a).unwrap();
                let er: f64 = row_space.iter().map(|x| x.norm_sqr()).sum();
                let ar = nom.precode(&row_space).unwrap();
                let ear: f64 = ar.iter().map(|x| x.norm_sqr()).sum();
                prop_assert!((ear - er).abs() < 1e-9 * er.max(1.0));
            }
        }
    }
}
