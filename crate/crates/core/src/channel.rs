//! Parametric low-pass IM-DD channel emulator.
//!
//! The electrical response of the modulator, fibre and photodiode chain is
//! replaced by a zero-phase magnitude response, a received-optical-power
//! gain and additive white Gaussian receiver noise. Detection is square
//! law, so the electrical amplitude follows optical power:
//! `gain = 10^((rop_dbm - 0 dBm) / 10)` and 1 dB of optical power buys
//! 2 dB of electrical SNR against the fixed receiver noise.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::{LN_2, PI};

/// Reference received optical power (dBm) at which the electrical gain is 1.
pub const ROP_REFERENCE_DBM: f64 = 0.0;

/// Welch segment length used by [`measure_spectrum`].
pub const WELCH_SEGMENT: usize = 256;

/// Amplitude response of the emulated link.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Flat,
    /// `exp(-ln2 (f / f_3db)^2)`, i.e. -3 dB in power at `f_3db`.
    GaussianLowpass { f_3db: f64 },
    /// `(frequency_hz, gain_db)` pairs with strictly increasing frequency,
    /// linearly interpolated in dB and clamped to the end points.
    Tabulated(Vec<(f64, f64)>),
}

/// Channel magnitude response plus receiver noise and optical power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub response: Response,
    /// Variance of the additive receiver noise per real sample.
    pub noise_psd: f64,
    pub rop_dbm: f64,
}

/// Names accepted by [`ChannelProfile::preset`].
pub const PRESETS: [(&str, &str); 3] = [
    ("flat", "unit gain at every frequency"),
    ("gauss-10g", "Gaussian low-pass, -3 dB at 10 GHz"),
    (
        "paper-20km",
        "tabulated 20-km IM-DD response: about 1 dB/GHz to 11 GHz, steep roll-off beyond",
    ),
];

/// Magnitude table of the `paper-20km` preset, `(Hz, dB)`.
pub const PAPER_20KM_TABLE: [(f64, f64); 9] = [
    (0.0, 0.0),
    (2.0e9, -1.5),
    (4.0e9, -3.2),
    (6.0e9, -5.0),
    (8.0e9, -7.0),
    (10.0e9, -9.3),
    (11.0e9, -11.0),
    (12.0e9, -19.0),
    (13.0e9, -27.0),
];

/// Receiver noise at which the `paper-20km` preset puts the 3-band plan
/// around a BER of 1e-4.
pub const PAPER_20KM_NOISE: f64 = 0.008;

impl ChannelProfile {
    /// Noiseless flat channel at the reference power.
    pub fn flat() -> Self {
        Self {
            response: Response::Flat,
            noise_psd: 0.0,
            rop_dbm: ROP_REFERENCE_DBM,
        }
    }

    pub fn gaussian_lowpass(f_3db: f64) -> Self {
        Self {
            response: Response::GaussianLowpass { f_3db },
            ..Self::flat()
        }
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        validate_table(&table)?;
        Ok(Self {
            response: Response::Tabulated(table),
            ..Self::flat()
        })
    }

    /// One of the shipped [`PRESETS`], noiseless at the reference power.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "flat" => Ok(Self::flat()),
            "gauss-10g" => Ok(Self::gaussian_lowpass(10e9)),
            "paper-20km" => Self::tabulated(PAPER_20KM_TABLE.to_vec()),
            other => Err(Error::Config(format!("unknown channel preset '{other}'"))),
        }
    }

    pub fn with_noise(mut self, noise_psd: f64) -> Self {
        self.noise_psd = noise_psd;
        self
    }

    pub fn with_rop(mut self, rop_dbm: f64) -> Self {
        self.rop_dbm = rop_dbm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_psd.is_finite() && self.noise_psd >= 0.0) {
            return Err(Error::Config(format!("noise variance {} must be >= 0", self.noise_psd)));
        }
        if !self.rop_dbm.is_finite() {
            return Err(Error::Config("received optical power must be finite".into()));
        }
        match &self.response {
            Response::Flat => Ok(()),
            Response::GaussianLowpass { f_3db } if f_3db.is_finite() && *f_3db > 0.0 => Ok(()),
            Response::GaussianLowpass { f_3db } => {
                Err(Error::Config(format!("3-dB frequency {f_3db} must be positive")))
            }
            Response::Tabulated(t) => validate_table(t),
        }
    }

    /// Electrical amplitude gain implied by the received optical power.
    pub fn electrical_gain(&self) -> f64 {
        10f64.powf((self.rop_dbm - ROP_REFERENCE_DBM) / 10.0)
    }

    /// Complex (zero-phase) gain at frequency `f` in Hz.
    pub fn gain(&self, f: f64) -> Complex64 {
        let mag = match &self.response {
            Response::Flat => 1.0,
            Response::GaussianLowpass { f_3db } => (-0.5 * LN_2 * (f / f_3db).powi(2)).exp(),
            Response::Tabulated(table) => 10f64.powf(interpolate_db(table, f) / 20.0),
        };
        Complex64::new(mag, 0.0)
    }
}

fn validate_table(table: &[(f64, f64)]) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Config("channel table is empty".into()));
    }
    if table.iter().any(|(f, g)| !f.is_finite() || !g.is_finite()) {
        return Err(Error::Config("channel table holds a non-finite value".into()));
    }
    if let Some(w) = table.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(Error::Config(format!(
            "channel table frequencies must increase strictly ({} then {})",
            w[0].0, w[1].0
        )));
    }
    Ok(())
}

fn interpolate_db(table: &[(f64, f64)], f: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if f <= first.0 {
        return first.1;
    }
    if f >= last.0 {
        return last.1;
    }
    let hi = table.partition_point(|&(x, _)| x <= f);
    let (f0, g0) = table[hi - 1];
    let (f1, g1) = table[hi];
    g0 + (g1 - g0) * (f - f0) / (f1 - f0)
}

/// Parses a two-column `frequency_hz gain_db` table. Columns may be
/// separated by whitespace or a comma; `#` starts a comment.
pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut table = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("channel table line {}: bad number '{s}'", lineno + 1)))
        };
        match fields.as_slice() {
            [f, g] => table.push((parse(f)?, parse(g)?)),
            _ => {
                return Err(Error::Config(format!(
                    "channel table line {}: expected two columns",
                    lineno + 1
                )))
            }
        }
    }
    validate_table(&table)?;
    Ok(table)
}

/// Passes a real sample record through the channel.
///
/// The record is scaled by the optical-power gain, filtered by multiplying
/// its whole-record DFT with the profile response (circular, no overlap
/// handling) and corrupted by white Gaussian noise of variance `noise_psd`
/// drawn from a generator seeded with `seed`.
pub fn apply_channel(samples: &[f64], profile: &ChannelProfile, sample_rate: f64, seed: u64) -> Vec<f64> {
    let gain = profile.electrical_gain();
    let mut out: Vec<f64> = if matches!(profile.response, Response::Flat) || samples.is_empty() {
        samples.iter().map(|x| x * gain).collect()
    } else {
        let n = samples.len();
        let mut planner = FftPlanner::new();
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x * gain, 0.0)).collect();
        planner.plan_fft_forward(n).process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let folded = k.min(n - k);
            *v *= profile.gain(folded as f64 * sample_rate / n as f64);
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter().map(|z| z.re * scale).collect()
    };
    if profile.noise_psd > 0.0 {
        let sigma = profile.noise_psd.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in out.iter_mut() {
            let w: f64 = StandardNormal.sample(&mut rng);
            *x += sigma * w;
        }
    }
    out
}

/// Welch power spectrum: Hann-windowed 256-sample segments with 50 %
/// overlap, averaged and normalised so the peak is 0 dB. Returns the
/// one-sided `(frequency_hz, power_db)` grid.
pub fn measure_spectrum(samples: &[f64], sample_rate: f64) -> Result<Vec<(f64, f64)>> {
    let seg = WELCH_SEGMENT;
    if samples.len() < seg {
        return Err(Error::Config(format!(
            "spectrum needs at least {seg} samples, got {}",
            samples.len()
        )));
    }
    let hop = seg / 2;
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut psd = vec![0.0; seg / 2 + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= samples.len() {
        for ((b, &x), w) in buf.iter_mut().zip(&samples[start..start + seg]).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, v) in psd.iter_mut().zip(&buf) {
            *p += v.norm_sqr();
        }
        start += hop;
    }
    let peak = psd.iter().cloned().fold(0.0, f64::max);
    let floor = f64::MIN_POSITIVE;
    Ok(psd
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let db = if peak > 0.0 { 10.0 * (p.max(floor) / peak).log10() } else { 0.0 };
            (k as f64 * sample_rate / seg as f64, db)
        })
        .collect())
}

/// Highest frequency whose level is at or above `threshold_db` (relative to
/// the 0 dB peak).
pub fn spectral_edge(spectrum: &[(f64, f64)], threshold_db: f64) -> Option<f64> {
    spectrum
        .iter()
        .rev()
        .find(|&&(_, db)| db >= threshold_db)
        .map(|&(f, _)| f)
}
