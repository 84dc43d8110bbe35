//! QAM allocation profiles, complexity accounting and the Chow bit-loading
//! baseline.

use crate::error::{Error, Result};
use crate::channel::ChannelProfile;
use crate::modem::{BandPlan, FrameConfig};
use crate::receiver::DetectorConfig;
use num_rational::Ratio;

/// Exact operation count.
pub type OpCount = Ratio<i128>;

/// Which of the two 4-band allocations to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FourBandVariant {
    /// `[16, 16, 4, 4]`
    #[default]
    A,
    /// `[16, 16, 8, 2]`
    B,
}

/// QAM orders per band (lowest frequency first) for 1 to 5 bands. Every
/// profile carries 3 bits per subcarrier on average.
pub fn allocation_profile(l_bands: usize, variant: FourBandVariant) -> Result<Vec<usize>> {
    Ok(match (l_bands, variant) {
        (1, _) => vec![8],
        (2, _) => vec![16, 4],
        (3, _) => vec![16, 8, 4],
        (4, FourBandVariant::A) => vec![16, 16, 4, 4],
        (4, FourBandVariant::B) => vec![16, 16, 8, 2],
        (5, _) => vec![16, 16, 8, 4, 4],
        (l, _) => {
            return Err(Error::Config(format!(
                "no built-in QAM allocation for {l} bands; supply one explicitly"
            )))
        }
    })
}

/// Complex multiplications and additions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ops {
    pub cm: OpCount,
    pub ca: OpCount,
}

impl Ops {
    fn zero() -> Self {
        Self {
            cm: OpCount::from_integer(0),
            ca: OpCount::from_integer(0),
        }
    }

    fn add(self, other: Ops) -> Ops {
        Ops {
            cm: self.cm + other.cm,
            ca: self.ca + other.ca,
        }
    }
}

/// Sequence-detector cost per band (`n` symbols, `c` survivors, order `q`).
pub fn viterbi_ops(n: u64, c: u64, q: u64) -> Ops {
    let (n, cq) = (n as i128, (c * q) as i128);
    let (n2, n3, n5) = (n * n, n * n * n, n.pow(5));
    let cm = (-30 - 90 * cq) + (59 + 25 * cq) * n + (45 * cq - 30) * n2 + 20 * cq * n3 + n5;
    let ca = (-30 - 30 * cq) + (59 - 20 * cq) * n + (30 * cq - 30) * n2 + 20 * cq * n3 + n5;
    Ops {
        cm: OpCount::new(cm, 30),
        ca: OpCount::new(ca, 30),
    }
}

/// Full per-band cost: forward precoding (`m x n`), inverse precoding
/// (`n x m`) and the sequence detector.
pub fn complexity_exact(n: u64, m: u64, c: u64, q: u64) -> Ops {
    let (n_, m_) = (n as i128, m as i128);
    let precoding = Ops {
        cm: OpCount::from_integer(2 * m_ * n_),
        ca: OpCount::from_integer(m_ * (n_ - 1) + n_ * (m_ - 1)),
    };
    precoding.add(viterbi_ops(n, c, q))
}

/// Dominant-term approximation `(20 c q n^3 + n^5) / 30` used for both
/// metrics.
pub fn complexity_approx(n: u64, c: u64, q: u64) -> Ops {
    let (n, cq) = (n as i128, (c * q) as i128);
    let v = OpCount::new(20 * cq * n.pow(3) + n.pow(5), 30);
    Ops { cm: v, ca: v }
}

/// Complexity of a plan and its reduction against a baseline plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub exact: Ops,
    pub approx: Ops,
    pub baseline_exact: Ops,
    pub baseline_approx: Ops,
}

impl ComplexityReport {
    /// `1 - plan / baseline` on the approximate counts, `(cm, ca)`.
    pub fn reduction(&self) -> (f64, f64) {
        (
            reduction(self.approx.cm, self.baseline_approx.cm),
            reduction(self.approx.ca, self.baseline_approx.ca),
        )
    }

    /// `1 - plan / baseline` on the exact counts, `(cm, ca)`.
    pub fn reduction_exact(&self) -> (f64, f64) {
        (
            reduction(self.exact.cm, self.baseline_exact.cm),
            reduction(self.exact.ca, self.baseline_exact.ca),
        )
    }
}

fn reduction(plan: OpCount, baseline: OpCount) -> f64 {
    if *baseline.numer() == 0 {
        return 0.0;
    }
    to_f64(OpCount::from_integer(1) - plan / baseline)
}

pub fn to_f64(r: OpCount) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Sums exact and approximate costs over the bands of a plan.
pub fn plan_complexity(plan: &BandPlan, det: &DetectorConfig) -> (Ops, Ops) {
    let mut exact = Ops::zero();
    let mut approx = Ops::zero();
    for (l, b) in plan.bands().iter().enumerate() {
        let c = survivors_for_cost(det, l, b.q);
        exact = exact.add(complexity_exact(b.n as u64, b.m as u64, c, b.q as u64));
        approx = approx.add(complexity_approx(b.n as u64, c, b.q as u64));
    }
    (exact, approx)
}

// An exhaustive search is costed as if it kept Q survivors.
fn survivors_for_cost(det: &DetectorConfig, band: usize, q: usize) -> u64 {
    if det.exhaustive {
        q as u64
    } else {
        det.survivors_for(band, q) as u64
    }
}

pub fn complexity_reduction(
    plan: &BandPlan,
    det: &DetectorConfig,
    baseline: &BandPlan,
    baseline_det: &DetectorConfig,
) -> ComplexityReport {
    let (exact, approx) = plan_complexity(plan, det);
    let (baseline_exact, baseline_approx) = plan_complexity(baseline, baseline_det);
    ComplexityReport {
        exact,
        approx,
        baseline_exact,
        baseline_approx,
    }
}

/// Largest bits per subcarrier (16QAM).
pub const MAX_BITS: usize = 4;

/// Default SNR gap in dB.
pub const DEFAULT_GAP_DB: f64 = 3.0;

const CHOW_MAX_ITERATIONS: usize = 64;

/// Chow-Cioffi-Bingham practical loading.
///
/// Iterates the margin `gamma` so that the rounded
/// `log2(1 + snr / (gap * gamma))` over all bins meets `target_bits`, then
/// fixes any remaining mismatch by adding bits where the rounding residual
/// is largest (or removing where it is smallest). Bits are clamped to
/// `0..=4`.
pub fn chow_bitload(snr_db: &[f64], target_bits: usize, gap_db: f64) -> Result<Vec<usize>> {
    if snr_db.is_empty() {
        return Err(Error::Allocation("no subcarriers to load".into()));
    }
    if target_bits > MAX_BITS * snr_db.len() {
        return Err(Error::Allocation(format!(
            "{target_bits} bits exceed the {}-bit capacity of {} subcarriers",
            MAX_BITS * snr_db.len(),
            snr_db.len()
        )));
    }
    if snr_db.iter().chain([&gap_db]).any(|v| !v.is_finite()) {
        return Err(Error::Allocation("SNR and gap values must be finite".into()));
    }
    let snr: Vec<f64> = snr_db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
    let gap = 10f64.powf(gap_db / 10.0);
    let unrounded = |margin_db: f64| -> Vec<f64> {
        let m = 10f64.powf(margin_db / 10.0);
        snr.iter().map(|s| (1.0 + s / (gap * m)).log2()).collect()
    };
    let clamp = |x: f64| (x.round().max(0.0) as usize).min(MAX_BITS);

    let mut margin_db = 0.0;
    let mut ideal = unrounded(margin_db);
    for _ in 0..CHOW_MAX_ITERATIONS {
        ideal = unrounded(margin_db);
        let bits: Vec<usize> = ideal.iter().map(|&x| clamp(x)).collect();
        let total: usize = bits.iter().sum();
        let used = bits.iter().filter(|&&b| b > 0).count();
        if total == target_bits {
            break;
        }
        let used = used.max(1) as f64;
        margin_db += 10.0 * 2f64.log10() * (total as f64 - target_bits as f64) / used;
    }
    let mut bits: Vec<usize> = ideal.iter().map(|&x| clamp(x)).collect();
    let mut residual: Vec<f64> = ideal.iter().zip(&bits).map(|(x, &b)| x - b as f64).collect();
    let mut total: usize = bits.iter().sum();
    while total < target_bits {
        // largest residual first, lowest index on ties
        let i = (0..bits.len())
            .filter(|&i| bits[i] < MAX_BITS)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if residual[b] >= residual[i] => Some(b),
                _ => Some(i),
            })
            .ok_or_else(|| Error::Allocation("cannot place remaining bits".into()))?;
        bits[i] += 1;
        residual[i] -= 1.0;
        total += 1;
    }
    while total > target_bits {
        // smallest residual first, highest index on ties
        let i = (0..bits.len())
            .filter(|&i| bits[i] > 0)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if residual[b] < residual[i] => Some(b),
                _ => Some(i),
            })
            .ok_or_else(|| Error::Allocation("cannot remove surplus bits".into()))?;
        bits[i] -= 1;
        residual[i] += 1.0;
        total -= 1;
    }
    Ok(bits)
}

/// Per-subcarrier SNR in dB implied by a channel profile for subcarriers
/// `1..=v_total`.
pub fn profile_snr_db(profile: &ChannelProfile, frame: &FrameConfig, v_total: usize) -> Result<Vec<f64>> {
    profile.validate()?;
    if profile.noise_psd <= 0.0 {
        return Err(Error::Allocation("bit loading needs a nonzero noise level".into()));
    }
    let g2 = profile.electrical_gain().powi(2);
    Ok((1..=v_total)
        .map(|b| {
            let h2 = profile.gain(b as f64 * frame.bin_spacing()).norm_sqr();
            10.0 * (g2 * h2 / profile.noise_psd).log10()
        })
        .collect())
}

/// Chow-loaded plan over `v_total` subcarriers for the given channel.
pub fn chow_plan(
    profile: &ChannelProfile,
    frame: &FrameConfig,
    v_total: usize,
    target_bits: usize,
    gap_db: f64,
) -> Result<BandPlan> {
    let snr = profile_snr_db(profile, frame, v_total)?;
    BandPlan::bit_loaded(&chow_bitload(&snr, target_bits, gap_db)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles() {
        assert_eq!(allocation_profile(3, FourBandVariant::A).unwrap(), vec![16, 8, 4]);
        assert_eq!(allocation_profile(5, FourBandVariant::A).unwrap(), vec![16, 16, 8, 4, 4]);
        assert_eq!(allocation_profile(4, FourBandVariant::B).unwrap(), vec![16, 16, 8, 2]);
        assert!(allocation_profile(6, FourBandVariant::A).is_err());
        assert!(allocation_profile(0, FourBandVariant::A).is_err());
    }

    #[test]
    fn profiles_average_three_bits_and_decrease() {
        for l in 1..=5 {
            for v in [FourBandVariant::A, FourBandVariant::B] {
                let p = allocation_profile(l, v).unwrap();
                assert_eq!(p.len(), l);
                let bits: u32 = p.iter().map(|q| q.trailing_zeros()).sum();
                assert_eq!(bits as usize, 3 * l);
                assert!(p.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn viterbi_polynomial_vanishes_at_unit_point() {
        let v = viterbi_ops(1, 1, 1);
        assert_eq!(v.cm, OpCount::from_integer(0));
        // CA: (-60 + 39 + 0 + 20 + 1) / 30 = 0
        assert_eq!(v.ca, OpCount::from_integer(0));
    }

    #[test]
    fn precoding_counts() {
        let with = complexity_exact(40, 36, 1, 1);
        let without = viterbi_ops(40, 1, 1);
        assert_eq!(with.cm - without.cm, OpCount::from_integer(2 * 1440));
        assert_eq!(with.ca - without.ca, OpCount::from_integer(1404 + 40 * 35));
    }

    #[test]
    fn approx_values() {
        assert_eq!(complexity_approx(120, 8, 8).cm, OpCount::from_integer(903_168_000));
        assert_eq!(complexity_approx(40, 16, 16).cm, OpCount::from_integer(14_336_000));
        assert_eq!(complexity_approx(1, 1, 1).ca, OpCount::new(7, 10));
    }

    #[test]
    fn single_band_exact_close_to_approx() {
        let exact = to_f64(viterbi_ops(120, 8, 8).cm);
        assert!((exact / 903_168_000.0 - 1.0).abs() < 0.01, "{exact}");
    }

    #[test]
    fn reduction_against_itself_is_zero() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 8, 4]).unwrap();
        let det = DetectorConfig::default();
        let r = complexity_reduction(&plan, &det, &plan, &det);
        assert_eq!(r.reduction(), (0.0, 0.0));
        assert_eq!(r.reduction_exact(), (0.0, 0.0));
    }

    #[test]
    fn chow_flat_channel_is_uniform() {
        let bits = chow_bitload(&[12.0; 10], 20, 0.0).unwrap();
        assert_eq!(bits, vec![2; 10]);
    }

    #[test]
    fn chow_two_bins() {
        assert_eq!(chow_bitload(&[30.0, 0.0], 4, 0.0).unwrap(), vec![4, 0]);
    }

    #[test]
    fn chow_caps_and_errors() {
        assert!(matches!(chow_bitload(&[40.0; 3], 13, 3.0), Err(Error::Allocation(_))));
        assert_eq!(chow_bitload(&[40.0; 3], 12, 3.0).unwrap(), vec![4, 4, 4]);
        assert_eq!(chow_bitload(&[5.0; 3], 0, 3.0).unwrap(), vec![0, 0, 0]);
        assert!(chow_bitload(&[], 0, 3.0).is_err());
    }

    #[test]
    fn chow_plan_follows_the_channel() {
        let frame = FrameConfig::default();
        let profile = ChannelProfile::preset("paper-20km").unwrap().with_noise(crate::channel::PAPER_20KM_NOISE);
        let plan = chow_plan(&profile, &frame, 120, 360, DEFAULT_GAP_DB).unwrap();
        let bits: Vec<usize> = plan.bands().iter().map(|b| b.bits_per_symbol()).collect();
        assert_eq!(bits.iter().sum::<usize>(), 360);
        assert!(bits.first() >= bits.last());
        assert!(chow_plan(&ChannelProfile::flat(), &frame, 120, 360, 3.0).is_err());
    }
}
