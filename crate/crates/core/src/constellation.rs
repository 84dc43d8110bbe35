//! QAM alphabets used on the sub-bands.
//!
//! Points are stored in label order: the point at index `i` carries the
//! `log2(Q)`-bit label whose integer value is `i`, first bit most
//! significant. All alphabets have unit average power.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// Outer/inner radius ratio of the two-ring 8QAM: `(1 + sqrt(3)) / sqrt(2)`.
///
/// This is the ratio at which an inner point is equidistant from its two ring
/// neighbours and its two outer neighbours, maximising the minimum distance.
pub fn circular_8qam_ratio() -> f64 {
    (1.0 + 3f64.sqrt()) / SQRT_2
}

/// A QAM alphabet with Q points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    /// Builds the canonical alphabet for `order` in {2, 4, 8, 16}.
    ///
    /// 2 is antipodal, 4 and 16 are Gray-labelled square grids and 8 is the
    /// two-ring circular layout with [`circular_8qam_ratio`].
    pub fn new(order: usize) -> Result<Self> {
        match order {
            2 => Ok(Self::from_points(vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ])),
            4 => Ok(Self::from_points(qpsk_points())),
            8 => Self::circular_8qam(circular_8qam_ratio()),
            16 => Ok(Self::from_points(qam16_points())),
            other => Err(Error::Config(format!(
                "unsupported QAM order {other} (expected 2, 4, 8 or 16)"
            ))),
        }
    }

    /// Two-ring 8QAM with 4 inner points on the axes and 4 outer points on
    /// the diagonals, `outer / inner = ratio`.
    ///
    /// Walking counter-clockwise from angle 0 the points alternate
    /// inner/outer and carry the 3-bit reflected Gray sequence, so every
    /// inner-outer nearest pair differs in one bit and every inner-inner
    /// pair in two.
    pub fn circular_8qam(ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) || (ratio - 1.0).abs() < 1e-9 {
            return Err(Error::Config(format!("invalid 8QAM ring ratio {ratio}")));
        }
        const GRAY3: [usize; 8] = [0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];
        let inner = (2.0 / (1.0 + ratio * ratio)).sqrt();
        let outer = inner * ratio;
        let mut points = vec![Complex64::new(0.0, 0.0); 8];
        for (step, &label) in GRAY3.iter().enumerate() {
            let radius = if step % 2 == 0 { inner } else { outer };
            points[label] = Complex64::from_polar(radius, step as f64 * std::f64::consts::FRAC_PI_4);
        }
        Ok(Self::from_points(points))
    }

    fn from_points(points: Vec<Complex64>) -> Self {
        let order = points.len();
        Self {
            order,
            bits_per_symbol: order.trailing_zeros() as usize,
            points,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Points indexed by label value.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn average_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Maps consecutive `log2(Q)`-bit groups (MSB first) onto symbols.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        Ok(self
            .bits_to_labels(bits)?
            .into_iter()
            .map(|label| self.points[label])
            .collect())
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }

    /// Hard decision: label bits of the nearest point.
    pub fn demap_hard(&self, y: Complex64) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bits_per_symbol);
        self.push_label_bits(self.nearest(y), &mut out);
        out
    }

    /// Appends the bits of `label` (MSB first) to `out`.
    pub fn push_label_bits(&self, label: usize, out: &mut Vec<u8>) {
        for shift in (0..self.bits_per_symbol).rev() {
            out.push(((label >> shift) & 1) as u8);
        }
    }

    /// Inverse of [`Constellation::map_bits`] over a whole symbol sequence.
    pub fn demap_sequence(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for &y in symbols {
            self.push_label_bits(self.nearest(y), &mut out);
        }
        out
    }

    /// Splits a bit stream into symbol labels.
    pub fn bits_to_labels(&self, bits: &[u8]) -> Result<Vec<usize>> {
        let k = self.bits_per_symbol;
        if !bits.len().is_multiple_of(k) {
            return Err(Error::Framing {
                what: "bit count not a multiple of bits per symbol",
                expected: bits.len().div_ceil(k) * k,
                got: bits.len(),
            });
        }
        Ok(bits.chunks_exact(k).map(bits_to_label).collect())
    }
}

fn bits_to_label(group: &[u8]) -> usize {
    group.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

fn qpsk_points() -> Vec<Complex64> {
    // label b0 b1: b0 selects the imaginary sign, b1 the real sign
    let a = FRAC_1_SQRT_2;
    vec![
        Complex64::new(a, a),
        Complex64::new(-a, a),
        Complex64::new(a, -a),
        Complex64::new(-a, -a),
    ]
}

fn qam16_points() -> Vec<Complex64> {
    // two Gray-coded bits per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    const LEVEL: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];
    let scale = 1.0 / 10f64.sqrt();
    (0..16)
        .map(|label| {
            let re = LEVEL[label >> 2];
            let im = LEVEL[label & 3];
            Complex64::new(re * scale, im * scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unsupported_order_names_value() {
        let err = Constellation::new(32).unwrap_err();
        assert!(err.to_string().contains("32"));
        assert!(Constellation::new(1).is_err());
    }

    #[test]
    fn unit_power_and_distinct_points() {
        for q in [2, 4, 8, 16] {
            let c = Constellation::new(q).unwrap();
            assert_eq!(c.points().len(), q);
            assert!((c.average_power() - 1.0).abs() < 1e-12, "Q={q}");
            for i in 0..q {
                for j in 0..i {
                    assert!((c.point(i) - c.point(j)).norm() > 1e-6);
                }
            }
        }
    }

    #[test]
    fn bpsk_points() {
        let c = Constellation::new(2).unwrap();
        assert_eq!(c.map_bits(&[0]).unwrap(), vec![Complex64::new(1.0, 0.0)]);
        assert_eq!(c.map_bits(&[1]).unwrap(), vec![Complex64::new(-1.0, 0.0)]);
        // tie at the origin goes to point 0
        assert_eq!(c.demap_hard(Complex64::new(0.0, 0.0)), vec![0]);
    }

    #[test]
    fn qpsk_gray_labels_around_circle() {
        let c = Constellation::new(4).unwrap();
        let a = FRAC_1_SQRT_2;
        // counter-clockwise from the first quadrant: 00, 01, 11, 10
        let ring = [
            (Complex64::new(a, a), [0, 0]),
            (Complex64::new(-a, a), [0, 1]),
            (Complex64::new(-a, -a), [1, 1]),
            (Complex64::new(a, -a), [1, 0]),
        ];
        for (p, bits) in ring {
            assert_eq!(c.demap_hard(p), bits.to_vec());
            assert!((c.map_bits(&bits).unwrap()[0] - p).norm() < 1e-15);
        }
        let syms = c.map_bits(&[0, 0, 0, 1]).unwrap();
        assert_eq!(syms, vec![c.point(0), c.point(1)]);
    }

    #[test]
    fn circular_8qam_geometry() {
        let c = Constellation::new(8).unwrap();
        let mut radii: Vec<f64> = c.points().iter().map(|p| p.norm()).collect();
        radii.sort_by(f64::total_cmp);
        let (r1, r2) = (radii[0], radii[7]);
        assert!((radii[3] - r1).abs() < 1e-12 && (radii[4] - r2).abs() < 1e-12);
        assert!((r2 / r1 - 1.932).abs() < 1e-3);
        // unit power fixes r1: 4 r1^2 + 4 (k r1)^2 = 8
        let k = circular_8qam_ratio();
        assert!((r1 - (2.0 / (1.0 + k * k)).sqrt()).abs() < 1e-12);
        // inner-inner and inner-outer nearest distances coincide
        let d_ii = (c.point(0b000) - c.point(0b011)).norm();
        let d_io = (c.point(0b000) - c.point(0b001)).norm();
        assert!((d_ii - d_io).abs() < 1e-12);
    }

    #[test]
    fn circular_8qam_label_flips() {
        let c = Constellation::new(8).unwrap();
        let dmin = (0..8)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (c.point(i) - c.point(j)).norm())
            .fold(f64::INFINITY, f64::min);
        let mut flips = 0;
        let mut edges = 0;
        for i in 0..8 {
            for j in 0..i {
                if (c.point(i) - c.point(j)).norm() < dmin + 1e-9 {
                    edges += 1;
                    flips += (i ^ j).count_ones();
                }
            }
        }
        // 8 ring edges at one flip, 4 inner chords at two (triangles rule out fewer)
        assert_eq!(edges, 12);
        assert_eq!(flips, 16);
    }

    fn grid_neighbours_differ_in_one_bit(q: usize, step: f64) {
        let c = Constellation::new(q).unwrap();
        for i in 0..q {
            for j in 0..i {
                if ((c.point(i) - c.point(j)).norm() - step).abs() < 1e-9 {
                    assert_eq!((i ^ j).count_ones(), 1, "Q={q} labels {i} {j}");
                }
            }
        }
    }

    #[test]
    fn gray_property_square_grids() {
        grid_neighbours_differ_in_one_bit(4, SQRT_2);
        grid_neighbours_differ_in_one_bit(16, 2.0 / 10f64.sqrt());
    }

    #[test]
    fn exhaustive_round_trip() {
        for q in [2, 4, 8, 16] {
            let c = Constellation::new(q).unwrap();
            for label in 0..q {
                let mut bits = Vec::new();
                c.push_label_bits(label, &mut bits);
                let sym = c.map_bits(&bits).unwrap();
                assert_eq!(sym[0], c.point(label));
                assert_eq!(c.demap_hard(sym[0]), bits);
            }
        }
    }

    #[test]
    fn map_bits_rejects_partial_group() {
        let c = Constellation::new(16).unwrap();
        assert!(matches!(c.map_bits(&[0, 1, 1]), Err(Error::Framing { .. })));
        assert_eq!(c.map_bits(&[1, 0, 1, 1, 0, 0, 0, 1]).unwrap().len(), 2);
    }

    #[test]
    fn noisy_qpsk_high_snr_no_errors() {
        let c = Constellation::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bits: Vec<u8> = (0..2000).map(|_| rng.random_range(0..2)).collect();
        let noisy: Vec<Complex64> = c
            .map_bits(&bits)
            .unwrap()
            .into_iter()
            .map(|s| s + Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)))
            .collect();
        assert_eq!(c.demap_sequence(&noisy), bits);
    }
}
