//! Multi-band frequency-domain assembly and real-valued OFDM.
//!
//! Each sub-band contributes `m` precoded coefficients; the coefficients of
//! all bands are laid onto consecutive FFT bins from low to high frequency,
//! starting at bin 1. DC and Nyquist stay empty and the negative
//! frequencies carry the Hermitian mirror, so the time-domain block is
//! real.

use crate::constellation::Constellation;
use crate::error::{check_len, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Seed of the training-symbol pattern.
pub const TRAINING_SEED: u64 = 0;

/// Dimensions of one sub-band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandSpec {
    /// Original subcarriers (symbols) in the band.
    pub n: usize,
    /// Occupied subcarriers after compression.
    pub m: usize,
    /// QAM order.
    pub q: usize,
}

impl BandSpec {
    pub fn bits_per_symbol(&self) -> usize {
        self.q.trailing_zeros() as usize
    }

    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// How the plan was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    /// Equal-width sub-bands, each precoded by a truncated OCT.
    Precoded,
    /// Plain per-bin loading (one single-subcarrier band per loaded bin).
    BitLoaded,
}

/// Multi-band configuration: band dimensions, QAM orders and the
/// subcarrier map.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    kind: PlanKind,
    v_total: usize,
    alpha: f64,
    bands: Vec<BandSpec>,
    bins: Vec<usize>,
}

impl BandPlan {
    /// `qam.len()` equal bands over `v_total` subcarriers with a common
    /// compression factor; `m = round(alpha * n)`.
    pub fn uniform(v_total: usize, alpha: f64, qam: &[usize]) -> Result<Self> {
        let l_bands = qam.len();
        if l_bands == 0 {
            return Err(Error::Config("a band plan needs at least one band".into()));
        }
        if v_total == 0 || !v_total.is_multiple_of(l_bands) {
            return Err(Error::Config(format!(
                "{v_total} subcarriers cannot be split into {l_bands} equal bands"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("compression factor {alpha} outside (0, 1]")));
        }
        let n = v_total / l_bands;
        let m = compressed_size(n, alpha);
        let bands = qam.iter().map(|&q| BandSpec { n, m, q }).collect();
        Self::from_bands(v_total, alpha, bands)
    }

    /// Precoded plan from explicit band dimensions.
    pub fn from_bands(v_total: usize, alpha: f64, bands: Vec<BandSpec>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Config("a band plan needs at least one band".into()));
        }
        let mut sum_n = 0;
        for (l, b) in bands.iter().enumerate() {
            Constellation::new(b.q)?;
            if b.m == 0 || b.m > b.n {
                return Err(Error::Config(format!(
                    "band {}: m={} must satisfy 1 <= m <= n={}",
                    l + 1,
                    b.m,
                    b.n
                )));
            }
            sum_n += b.n;
        }
        if bands.iter().any(|b| b.n != bands[0].n) || sum_n != v_total {
            return Err(Error::Config(format!(
                "bands must split {v_total} subcarriers evenly"
            )));
        }
        if let Some(w) = bands.windows(2).find(|w| w[1].q > w[0].q) {
            return Err(Error::Config(format!(
                "QAM orders must be non-increasing with frequency (found {} before {})",
                w[0].q, w[1].q
            )));
        }
        let b_total: usize = bands.iter().map(|b| b.m).sum();
        Ok(Self {
            kind: PlanKind::Precoded,
            v_total,
            alpha,
            bands,
            bins: (1..=b_total).collect(),
        })
    }

    /// Per-bin loading over `bits.len()` bins starting at bin 1. Bins with
    /// zero bits stay empty; the loaded ones keep their frequency position.
    /// Loading follows the channel, so the monotone QAM rule does not apply.
    pub fn bit_loaded(bits: &[usize]) -> Result<Self> {
        let mut bands = Vec::new();
        let mut bins = Vec::new();
        for (i, &b) in bits.iter().enumerate() {
            if b == 0 {
                continue;
            }
            let q = 1usize << b;
            Constellation::new(q)?;
            bands.push(BandSpec { n: 1, m: 1, q });
            bins.push(i + 1);
        }
        if bands.is_empty() {
            return Err(Error::Config("bit loading left every bin empty".into()));
        }
        Ok(Self {
            kind: PlanKind::BitLoaded,
            v_total: bits.len(),
            alpha: 1.0,
            bands,
            bins,
        })
    }

    pub fn kind(&self) -> PlanKind {
        self.kind
    }

    pub fn l_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn v_total(&self) -> usize {
        self.v_total
    }

    /// Nominal compression factor the plan was built with.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Realised compression `B / V`.
    pub fn effective_alpha(&self) -> f64 {
        self.b_total() as f64 / self.v_total as f64
    }

    pub fn bands(&self) -> &[BandSpec] {
        &self.bands
    }

    pub fn qam_orders(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b.q).collect()
    }

    /// Occupied subcarriers `B`.
    pub fn b_total(&self) -> usize {
        self.bins.len()
    }

    /// FFT bin of each occupied coefficient, in band order.
    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    /// Range of occupied-coefficient indices belonging to each band.
    pub fn coeff_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.bands
            .iter()
            .map(|b| {
                let r = start..start + b.m;
                start += b.m;
                r
            })
            .collect()
    }

    /// Data bits carried by each band per OFDM block.
    pub fn band_bits(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b.n * b.bits_per_symbol()).collect()
    }

    /// Data bits per OFDM block.
    pub fn bits_per_block(&self) -> usize {
        self.band_bits().iter().sum()
    }
}

/// `round(alpha * n)`, at least 1.
pub fn compressed_size(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64).round() as usize).clamp(1, n)
}

/// OFDM framing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub n_fft: usize,
    pub cp_len: usize,
    /// Training blocks at the start of every frame.
    pub n_ts: usize,
    /// Payload blocks per frame.
    pub n_payload: usize,
    /// DAC sample rate in samples/second.
    pub sample_rate: f64,
    /// Receiver FFT window starts this many samples inside the cyclic
    /// prefix. The resulting phase ramp is removed in demodulation.
    pub fft_backoff: usize,
}

impl Default for FrameConfig {
    /// 256-point IFFT, 8-sample CP, 20 training and 200 payload blocks at
    /// 26 GSa/s.
    fn default() -> Self {
        Self {
            n_fft: 256,
            cp_len: 8,
            n_ts: 20,
            n_payload: 200,
            sample_rate: 26e9,
            fft_backoff: 4,
        }
    }
}

impl FrameConfig {
    pub fn block_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    pub fn frame_len(&self) -> usize {
        self.block_len() * (self.n_ts + self.n_payload)
    }

    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate / self.n_fft as f64
    }

    /// Checks the framing against a plan.
    pub fn validate(&self, plan: &BandPlan) -> Result<()> {
        if self.n_fft < 4 {
            return Err(Error::Config(format!("FFT size {} too small", self.n_fft)));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::Config(format!("invalid sample rate {}", self.sample_rate)));
        }
        if self.fft_backoff > self.cp_len {
            return Err(Error::Config(format!(
                "FFT backoff {} exceeds cyclic prefix {}",
                self.fft_backoff, self.cp_len
            )));
        }
        let top = plan.bins().iter().copied().max().unwrap_or(0);
        if 2 * top + 2 > self.n_fft {
            return Err(Error::Config(format!(
                "{} occupied bins (highest bin {top}) do not fit a Hermitian {}-point FFT",
                plan.b_total(),
                self.n_fft
            )));
        }
        Ok(())
    }
}

/// Places per-band coefficients onto the FFT grid with Hermitian symmetry.
pub fn assemble_spectrum(
    coeffs: &[Vec<Complex64>],
    plan: &BandPlan,
    cfg: &FrameConfig,
) -> Result<Vec<Complex64>> {
    check_len("band count", plan.l_bands(), coeffs.len())?;
    let mut flat = Vec::with_capacity(plan.b_total());
    for (band, c) in plan.bands().iter().zip(coeffs) {
        check_len("band coefficients", band.m, c.len())?;
        flat.extend_from_slice(c);
    }
    place_bins(&flat, plan, cfg)
}

/// Places `B` occupied-bin values (band order) onto the FFT grid.
pub fn place_bins(values: &[Complex64], plan: &BandPlan, cfg: &FrameConfig) -> Result<Vec<Complex64>> {
    cfg.validate(plan)?;
    check_len("occupied bins", plan.b_total(), values.len())?;
    let n = cfg.n_fft;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for (&bin, &v) in plan.bins().iter().zip(values) {
        spectrum[bin] = v;
        spectrum[n - bin] = v.conj();
    }
    Ok(spectrum)
}

/// Real-valued OFDM modulator/demodulator with cached FFT plans.
///
/// Holds scratch buffers, so each worker needs its own instance.
pub struct OfdmModem {
    cfg: FrameConfig,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    derotate: Vec<Complex64>,
}

impl OfdmModem {
    pub fn new(cfg: &FrameConfig) -> Self {
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(cfg.n_fft);
        let fft = planner.plan_fft_forward(cfg.n_fft);
        let scratch_len = ifft.get_inplace_scratch_len().max(fft.get_inplace_scratch_len());
        let n = cfg.n_fft as f64;
        let derotate = (0..cfg.n_fft)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * (k * cfg.fft_backoff) as f64 / n))
            .collect();
        Self {
            cfg: cfg.clone(),
            ifft,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); cfg.n_fft],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            derotate,
        }
    }

    pub fn config(&self) -> &FrameConfig {
        &self.cfg
    }

    /// Unitary inverse DFT of a Hermitian spectrum with the cyclic prefix
    /// prepended; appends `n_fft + cp_len` samples to `out`.
    pub fn modulate_into(&mut self, spectrum: &[Complex64], out: &mut Vec<f64>) -> Result<()> {
        let n = self.cfg.n_fft;
        check_len("spectrum", n, spectrum.len())?;
        self.buf.copy_from_slice(spectrum);
        self.ifft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / (n as f64).sqrt();
        let peak = self.buf.iter().map(|z| z.norm()).fold(0.0, f64::max) * scale;
        let tol = 1e-9 * peak.max(1.0);
        let residue = self.buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max) * scale;
        if residue > tol {
            return Err(Error::Integrity(format!(
                "spectrum is not Hermitian (imaginary residue {residue:e})"
            )));
        }
        let cp = self.cfg.cp_len;
        out.extend(self.buf[n - cp..].iter().map(|z| z.re * scale));
        out.extend(self.buf.iter().map(|z| z.re * scale));
        Ok(())
    }

    pub fn modulate(&mut self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.cfg.block_len());
        self.modulate_into(spectrum, &mut out)?;
        Ok(out)
    }

    /// Full `n_fft`-bin spectrum of one received block.
    pub fn demodulate_spectrum(&mut self, block: &[f64]) -> Result<Vec<Complex64>> {
        check_len("OFDM block", self.cfg.block_len(), block.len())?;
        let n = self.cfg.n_fft;
        let start = self.cfg.cp_len - self.cfg.fft_backoff;
        for (dst, &src) in self.buf.iter_mut().zip(&block[start..start + n]) {
            *dst = Complex64::new(src, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / (n as f64).sqrt();
        Ok(self
            .buf
            .iter()
            .zip(&self.derotate)
            .map(|(z, r)| z * r * scale)
            .collect())
    }

    /// Occupied bins of one received block, in band order.
    pub fn demodulate(&mut self, block: &[f64], plan: &BandPlan) -> Result<Vec<Complex64>> {
        let spectrum = self.demodulate_spectrum(block)?;
        Ok(plan.bins().iter().map(|&b| spectrum[b]).collect())
    }
}

/// Known training pattern: `n_ts` blocks of QPSK on the occupied bins,
/// drawn from [`TRAINING_SEED`]. Training blocks are not precoded.
pub fn training_symbols(plan: &BandPlan, cfg: &FrameConfig) -> Vec<Vec<Complex64>> {
    let qpsk = Constellation::new(4).expect("QPSK is always supported");
    let mut rng = ChaCha8Rng::seed_from_u64(TRAINING_SEED);
    (0..cfg.n_ts)
        .map(|_| {
            (0..plan.b_total())
                .map(|_| qpsk.point(rng.random_range(0..4)))
                .collect()
        })
        .collect()
}

/// Direct FTN-NOFDM generation: `l_samples` samples of
/// `X[k] = sum_v s_v exp(i 2 pi v alpha k / l_samples)`.
///
/// When `n_fft_direct * alpha == l_samples` this is computed as an
/// `n_fft_direct`-point inverse DFT of the zero-padded symbols with the
/// tail discarded; otherwise the sum is evaluated directly.
pub fn generate_ftn_direct(
    symbols: &[Complex64],
    alpha: f64,
    l_samples: usize,
    n_fft_direct: usize,
) -> Result<Vec<Complex64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("compression factor {alpha} outside (0, 1]")));
    }
    if l_samples == 0 {
        return Err(Error::Config("at least one sample per symbol period".into()));
    }
    let min_fft = (l_samples as f64 / alpha).floor() as usize + 1;
    let fft_matches = (n_fft_direct as f64 * alpha - l_samples as f64).abs() < 1e-9;
    if n_fft_direct < min_fft && !fft_matches {
        return Err(Error::Config(format!(
            "direct FTN IFFT size {n_fft_direct} below floor(L/alpha)+1 = {min_fft}"
        )));
    }
    if symbols.len() > n_fft_direct {
        return Err(Error::Config(format!(
            "{} symbols exceed the {n_fft_direct}-point IFFT",
            symbols.len()
        )));
    }
    if fft_matches {
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft_direct];
        buf[..symbols.len()].copy_from_slice(symbols);
        FftPlanner::new().plan_fft_inverse(n_fft_direct).process(&mut buf);
        buf.truncate(l_samples);
        return Ok(buf);
    }
    let step = 2.0 * PI * alpha / l_samples as f64;
    Ok((0..l_samples)
        .map(|k| {
            symbols
                .iter()
                .enumerate()
                .map(|(v, s)| s * Complex64::from_polar(1.0, step * (v * k) as f64))
                .sum()
        })
        .collect())
}

/// Net data rate in bit/s: payload bits per block over the block duration,
/// scaled by the payload share of the frame. Independent of compression.
pub fn line_rate(plan: &BandPlan, cfg: &FrameConfig) -> f64 {
    let bits = plan.bits_per_block() as f64;
    let payload_share = cfg.n_payload as f64 / (cfg.n_payload + cfg.n_ts) as f64;
    cfg.sample_rate * bits / cfg.block_len() as f64 * payload_share
}

/// Occupied electrical bandwidth in Hz: `B * sample_rate / n_fft`.
pub fn occupied_bandwidth(plan: &BandPlan, cfg: &FrameConfig) -> f64 {
    plan.b_total() as f64 * cfg.bin_spacing()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoder::NomMatrix;

    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn uniform_plan_dimensions() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 8, 4]).unwrap();
        assert_eq!(plan.l_bands(), 3);
        assert!(plan.bands().iter().all(|b| b.n == 40 && b.m == 36));
        assert_eq!(plan.b_total(), 108);
        assert_eq!(plan.bits_per_block(), 360);
        assert_eq!(plan.coeff_ranges(), vec![0..36, 36..72, 72..108]);
    }

    #[test]
    fn fractional_m_is_rounded() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 16, 8, 4, 4]).unwrap();
        assert_eq!(plan.bands()[0].m, 22);
        assert!((plan.effective_alpha() - 110.0 / 120.0).abs() < 1e-15);
    }

    #[test]
    fn plan_rejections() {
        assert!(BandPlan::uniform(120, 0.9, &[4, 16]).is_err());
        assert!(BandPlan::uniform(100, 0.9, &[16, 8, 4]).is_err());
        assert!(BandPlan::uniform(120, 1.1, &[8]).is_err());
        assert!(BandPlan::uniform(120, 0.9, &[32]).is_err());
        assert!(BandPlan::uniform(120, 0.9, &[]).is_err());
    }

    #[test]
    fn bit_loaded_plan_keeps_bin_positions() {
        let plan = BandPlan::bit_loaded(&[4, 0, 3, 1, 0]).unwrap();
        assert_eq!(plan.kind(), PlanKind::BitLoaded);
        assert_eq!(plan.bins(), &[1, 3, 4]);
        assert_eq!(plan.qam_orders(), vec![16, 8, 2]);
        assert_eq!(plan.bits_per_block(), 8);
        assert!(BandPlan::bit_loaded(&[0, 0]).is_err());
    }

    #[test]
    fn zero_and_single_tone_spectra() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 8, 4]).unwrap();
        let cfg = FrameConfig::default();
        let mut coeffs = vec![vec![zero(); 36]; 3];
        assert!(assemble_spectrum(&coeffs, &plan, &cfg)
            .unwrap()
            .iter()
            .all(|z| *z == zero()));
        coeffs[0][0] = Complex64::new(1.0, 0.0);
        let s = assemble_spectrum(&coeffs, &plan, &cfg).unwrap();
        for (k, v) in s.iter().enumerate() {
            let expect = if k == 1 || k == 255 { 1.0 } else { 0.0 };
            assert_eq!(*v, Complex64::new(expect, 0.0), "bin {k}");
        }
    }

    #[test]
    fn occupied_positive_bins_for_three_band_plan() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 8, 4]).unwrap();
        let cfg = FrameConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coeffs: Vec<_> = (0..3).map(|_| random_coeffs(&mut rng, 36)).collect();
        let s = assemble_spectrum(&coeffs, &plan, &cfg).unwrap();
        let occupied = (1..128).filter(|&k| s[k] != zero()).count();
        assert_eq!(occupied, 108);
        assert_eq!(s[0], zero());
        assert_eq!(s[128], zero());
        for k in 1..=108 {
            assert_eq!(s[256 - k], s[k].conj());
        }
    }

    #[test]
    fn oversized_plan_rejected() {
        let plan = BandPlan::uniform(128, 1.0, &[4]).unwrap();
        let cfg = FrameConfig::default();
        let err = assemble_spectrum(&[vec![zero(); 128]], &plan, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn band_lengths_checked() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 8, 4]).unwrap();
        let cfg = FrameConfig::default();
        let coeffs = vec![vec![zero(); 36], vec![zero(); 35], vec![zero(); 36]];
        assert!(matches!(
            assemble_spectrum(&coeffs, &plan, &cfg),
            Err(Error::Framing { .. })
        ));
    }

    #[test]
    fn modulate_zero_and_cosine() {
        let cfg = FrameConfig::default();
        let mut modem = OfdmModem::new(&cfg);
        let zeros = modem.modulate(&vec![zero(); 256]).unwrap();
        assert_eq!(zeros.len(), 264);
        assert!(zeros.iter().all(|&x| x == 0.0));

        let mut spec = vec![zero(); 256];
        spec[1] = Complex64::new(1.0, 0.0);
        spec[255] = Complex64::new(1.0, 0.0);
        let block = modem.modulate(&spec).unwrap();
        // one cycle per n_fft samples, i.e. sample_rate / n_fft
        for (t, &x) in block[8..].iter().enumerate() {
            let expect = 2.0 * (2.0 * PI * t as f64 / 256.0).cos() / 16.0;
            assert!((x - expect).abs() < 1e-12);
        }
        assert_eq!(&block[..8], &block[256..]);
    }

    #[test]
    fn non_hermitian_rejected() {
        let cfg = FrameConfig::default();
        let mut modem = OfdmModem::new(&cfg);
        let mut spec = vec![zero(); 256];
        spec[3] = Complex64::new(1.0, 0.0);
        assert!(matches!(modem.modulate(&spec), Err(Error::Integrity(_))));
    }

    #[test]
    fn demodulate_rejects_wrong_length() {
        let cfg = FrameConfig::default();
        let plan = BandPlan::uniform(120, 1.0, &[8]).unwrap();
        let mut modem = OfdmModem::new(&cfg);
        assert!(matches!(
            modem.demodulate(&[0.0; 256], &plan),
            Err(Error::Framing { .. })
        ));
    }

    #[test]
    fn modulate_demodulate_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for backoff in [0, 4, 8] {
            let cfg = FrameConfig {
                fft_backoff: backoff,
                ..FrameConfig::default()
            };
            let plan = BandPlan::uniform(120, 0.8, &[16, 8, 4]).unwrap();
            let mut modem = OfdmModem::new(&cfg);
            let data = random_coeffs(&mut rng, plan.b_total());
            let block = modem.modulate(&place_bins(&data, &plan, &cfg).unwrap()).unwrap();
            let back = modem.demodulate(&block, &plan).unwrap();
            for (a, b) in data.iter().zip(&back) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_loopback_alpha_one() {
        let cfg = FrameConfig::default();
        let plan = BandPlan::uniform(120, 1.0, &[16, 8, 4]).unwrap();
        let mut modem = OfdmModem::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for band in plan.bands() {
            assert_eq!(band.m, band.n);
        }
        let noms: Vec<_> = plan.bands().iter().map(|b| NomMatrix::new(b.n, b.m).unwrap()).collect();
        let cons: Vec<_> = plan.bands().iter().map(|b| Constellation::new(b.q).unwrap()).collect();
        for _ in 0..20 {
            let bits: Vec<Vec<u8>> = plan
                .band_bits()
                .iter()
                .map(|&n| (0..n).map(|_| rng.random_range(0..2u8)).collect())
                .collect();
            let coeffs: Vec<Vec<Complex64>> = bits
                .iter()
                .zip(&noms)
                .zip(&cons)
                .map(|((b, nom), c)| nom.precode(&c.map_bits(b).unwrap()).unwrap())
                .collect();
            let block = modem.modulate(&assemble_spectrum(&coeffs, &plan, &cfg).unwrap()).unwrap();
            let rx = modem.demodulate(&block, &plan).unwrap();
            for (((range, nom), c), b) in plan.coeff_ranges().into_iter().zip(&noms).zip(&cons).zip(&bits) {
                let soft = nom.inverse_precode(&rx[range]).unwrap();
                assert_eq!(&c.demap_sequence(&soft), b);
            }
        }
    }

    #[test]
    fn direct_generator_alpha_one_is_idft() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_coeffs(&mut rng, 8);
        let x = generate_ftn_direct(&s, 1.0, 8, 8).unwrap();
        for (k, xk) in x.iter().enumerate() {
            let expect: Complex64 = s
                .iter()
                .enumerate()
                .map(|(v, sv)| sv * Complex64::from_polar(1.0, 2.0 * PI * (v * k) as f64 / 8.0))
                .sum();
            assert!((xk - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn direct_generator_dc_is_constant() {
        let mut s = vec![zero(); 8];
        s[0] = Complex64::new(1.0, 0.0);
        for (alpha, n_fft) in [(1.0, 8), (0.8, 10), (0.8, 16)] {
            let x = generate_ftn_direct(&s, alpha, 8, n_fft).unwrap();
            assert!(x.iter().all(|v| (v - s[0]).norm() < 1e-12));
        }
    }

    #[test]
    fn direct_generator_fft_route_matches_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = random_coeffs(&mut rng, 8);
        // 10 * 0.8 == 8: the IFFT route
        let via_fft = generate_ftn_direct(&s, 0.8, 8, 10).unwrap();
        let step = 2.0 * PI * 0.8 / 8.0;
        for (k, x) in via_fft.iter().enumerate() {
            let direct: Complex64 = s
                .iter()
                .enumerate()
                .map(|(v, sv)| sv * Complex64::from_polar(1.0, step * (v * k) as f64))
                .sum();
            assert!((x - direct).norm() < 1e-10);
        }
        let wide = generate_ftn_direct(&s, 0.8, 8, 16).unwrap();
        for (a, b) in via_fft.iter().zip(&wide) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn direct_generator_size_checks() {
        let s = vec![Complex64::new(1.0, 0.0); 8];
        assert!(generate_ftn_direct(&s, 0.8, 8, 9).is_err());
        assert!(generate_ftn_direct(&s, 1.0, 8, 4).is_err());
        assert!(generate_ftn_direct(&s, 0.0, 8, 16).is_err());
    }

    /// -3 dB width (fraction of the sample rate) of the averaged, 16x
    /// zero-padded periodogram of random direct-FTN blocks.
    fn minus3db_width(alpha: f64, n_fft: usize) -> f64 {
        let pad = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let qpsk = Constellation::new(4).unwrap();
        let fft = FftPlanner::new().plan_fft_forward(pad);
        let mut psd = vec![0.0; pad];
        for _ in 0..2000 {
            let s: Vec<Complex64> = (0..8).map(|_| qpsk.point(rng.random_range(0..4))).collect();
            let x = generate_ftn_direct(&s, alpha, 8, n_fft).unwrap();
            let mut buf = vec![zero(); pad];
            buf[..8].copy_from_slice(&x);
            fft.process(&mut buf);
            for (p, v) in psd.iter_mut().zip(&buf) {
                *p += v.norm_sqr();
            }
        }
        let peak = psd.iter().cloned().fold(0.0, f64::max);
        psd.iter().filter(|&&p| p >= 0.5 * peak).count() as f64 / pad as f64
    }

    #[test]
    fn direct_generator_compresses_bandwidth() {
        let full = minus3db_width(1.0, 8);
        let squeezed = minus3db_width(0.8, 16);
        assert!((full - 1.0).abs() < 1e-12);
        assert!((squeezed / full - 0.8).abs() < 0.05, "ratio {}", squeezed / full);
    }

    #[test]
    fn reference_rate_and_bandwidths() {
        let cfg = FrameConfig::default();
        let single = BandPlan::uniform(120, 1.0, &[8]).unwrap();
        let rate = line_rate(&single, &cfg);
        assert!((rate / 1e9 - 32.2314).abs() < 1e-4);
        for (alpha, ghz) in [(1.0, 12.1875), (0.9, 10.96875), (0.8, 9.75)] {
            let plan = BandPlan::uniform(120, alpha, &[16, 8, 4]).unwrap();
            assert!((line_rate(&plan, &cfg) - rate).abs() < 1e-3);
            assert!((occupied_bandwidth(&plan, &cfg) / 1e9 - ghz).abs() < 1e-9);
        }
        let bare = FrameConfig {
            cp_len: 0,
            n_ts: 0,
            fft_backoff: 0,
            ..cfg
        };
        assert!((line_rate(&single, &bare) - 26e9 * 360.0 / 256.0).abs() < 1e-3);
    }

    #[test]
    fn training_pattern_is_fixed() {
        let plan = BandPlan::uniform(120, 0.9, &[16, 8, 4]).unwrap();
        let cfg = FrameConfig::default();
        let a = training_symbols(&plan, &cfg);
        assert_eq!(a.len(), 20);
        assert_eq!(a[0].len(), 108);
        assert_eq!(a, training_symbols(&plan, &cfg));
        assert!(a.iter().flatten().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
