//! End-to-end frame simulation: bits, precoding, OFDM, channel, receiver.
//!
//! A frame is `n_ts` training blocks followed by `n_payload` payload
//! blocks, passed through the channel as one record. Frame `i` of a run
//! draws its data bits and channel noise from seeds derived from
//! `(master_seed, i)`, and per-frame results are reduced in frame order, so
//! a run's output does not depend on the number of worker threads.

use crate::channel::{apply_channel, ChannelProfile};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::modem::{place_bins, training_symbols, BandPlan, FrameConfig, OfdmModem};
use crate::precoder::NomMatrix;
use crate::receiver::{
    count_errors, estimate_channel, zf_equalize, BerReport, DetectorConfig, RxEstimate, SequenceDetector,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Everything that defines a simulated link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub plan: BandPlan,
    pub frame: FrameConfig,
    pub channel: ChannelProfile,
    pub detector: DetectorConfig,
}

const DATA_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of random stream `stream` for frame `index` of a run.
pub fn frame_seed(master_seed: u64, index: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ index) ^ stream)
}

/// Result of one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub ber: BerReport,
    pub estimate: RxEstimate,
}

/// Aggregate of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub frames: u64,
    pub ber: BerReport,
    /// Post-ZF noise variance per occupied bin, averaged over frames.
    pub mean_sigma2: Vec<f64>,
    /// Band noise variance, averaged over frames.
    pub mean_sigma2_band: Vec<f64>,
}

/// Per-thread transform and search buffers.
pub struct Worker {
    modem: OfdmModem,
    detectors: Vec<SequenceDetector>,
}

/// Precomputed transmitter and receiver state for one link.
#[derive(Debug)]
pub struct LinkSimulator {
    cfg: LinkConfig,
    noms: Vec<NomMatrix>,
    constellations: Vec<Constellation>,
    training: Vec<Vec<Complex64>>,
    training_spectra: Vec<Vec<Complex64>>,
}

impl LinkSimulator {
    pub fn new(cfg: LinkConfig) -> Result<Self> {
        cfg.frame.validate(&cfg.plan)?;
        cfg.channel.validate()?;
        cfg.detector.validate(&cfg.plan)?;
        if cfg.frame.n_ts < 2 {
            return Err(Error::Config(format!(
                "at least 2 training blocks are needed, got {}",
                cfg.frame.n_ts
            )));
        }
        let noms = cfg
            .plan
            .bands()
            .iter()
            .map(|b| NomMatrix::new(b.n, b.m))
            .collect::<Result<Vec<_>>>()?;
        let constellations = cfg
            .plan
            .bands()
            .iter()
            .map(|b| Constellation::new(b.q))
            .collect::<Result<Vec<_>>>()?;
        let training = training_symbols(&cfg.plan, &cfg.frame);
        let training_spectra = training
            .iter()
            .map(|t| place_bins(t, &cfg.plan, &cfg.frame))
            .collect::<Result<Vec<_>>>()?;
        let sim = Self {
            cfg,
            noms,
            constellations,
            training,
            training_spectra,
        };
        // surface detector configuration errors before any frame runs
        sim.worker()?;
        Ok(sim)
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn noms(&self) -> &[NomMatrix] {
        &self.noms
    }

    pub fn constellations(&self) -> &[Constellation] {
        &self.constellations
    }

    pub fn worker(&self) -> Result<Worker> {
        let order = self.cfg.detector.order;
        let detectors = self
            .cfg
            .plan
            .bands()
            .iter()
            .enumerate()
            .zip(self.noms.iter().zip(&self.constellations))
            .map(|((l, b), (nom, c))| {
                SequenceDetector::new(nom, c, self.cfg.detector.survivors_for(l, b.q), order)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Worker {
            modem: OfdmModem::new(&self.cfg.frame),
            detectors,
        })
    }

    /// Transmitted samples of one frame and its payload bits (block-major,
    /// band order inside a block).
    pub fn transmit(&self, worker: &mut Worker, data_seed: u64) -> Result<(Vec<f64>, Vec<u8>)> {
        let frame = &self.cfg.frame;
        let plan = &self.cfg.plan;
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        let mut samples = Vec::with_capacity(frame.frame_len());
        for spectrum in &self.training_spectra {
            worker.modem.modulate_into(spectrum, &mut samples)?;
        }
        let mut bits = Vec::with_capacity(plan.bits_per_block() * frame.n_payload);
        let mut coeffs = Vec::with_capacity(plan.b_total());
        for _ in 0..frame.n_payload {
            coeffs.clear();
            for (band, (nom, c)) in plan.bands().iter().zip(self.noms.iter().zip(&self.constellations)) {
                let start = bits.len();
                bits.extend((0..band.n * band.bits_per_symbol()).map(|_| rng.random_range(0..2u8)));
                let symbols = c.map_bits(&bits[start..])?;
                coeffs.extend(nom.precode(&symbols)?);
            }
            let spectrum = place_bins(&coeffs, plan, frame)?;
            worker.modem.modulate_into(&spectrum, &mut samples)?;
        }
        Ok((samples, bits))
    }

    /// Receiver: estimation from the training blocks, then per-band
    /// detection of every payload block. Returns the decided bits.
    pub fn receive(&self, worker: &mut Worker, samples: &[f64]) -> Result<(Vec<u8>, RxEstimate)> {
        let frame = &self.cfg.frame;
        let plan = &self.cfg.plan;
        let block_len = frame.block_len();
        let mut blocks = samples.chunks_exact(block_len);
        let rx_ts = blocks
            .by_ref()
            .take(frame.n_ts)
            .map(|b| worker.modem.demodulate(b, plan))
            .collect::<Result<Vec<_>>>()?;
        let estimate = estimate_channel(&rx_ts, &self.training, plan)?;
        let ranges = plan.coeff_ranges();
        let mut bits = Vec::with_capacity(plan.bits_per_block() * frame.n_payload);
        for block in blocks.take(frame.n_payload) {
            let y = zf_equalize(&worker.modem.demodulate(block, plan)?, &estimate)?;
            for (l, range) in ranges.iter().enumerate() {
                let z = self.noms[l].inverse_precode(&y[range.clone()])?;
                let det = worker.detectors[l].detect(&z, estimate.sigma2_band[l])?;
                let c = &self.constellations[l];
                for &label in &det.labels {
                    c.push_label_bits(label, &mut bits);
                }
            }
        }
        Ok((bits, estimate))
    }

    /// Simulates frame `index` of a run seeded with `master_seed`.
    pub fn simulate_frame(&self, worker: &mut Worker, master_seed: u64, index: u64) -> Result<FrameOutcome> {
        let mut run = || -> Result<FrameOutcome> {
            let (tx, tx_bits) = self.transmit(worker, frame_seed(master_seed, index, DATA_STREAM))?;
            let rx = apply_channel(
                &tx,
                &self.cfg.channel,
                self.cfg.frame.sample_rate,
                frame_seed(master_seed, index, NOISE_STREAM),
            );
            let (rx_bits, estimate) = self.receive(worker, &rx)?;
            let ber = count_errors(&tx_bits, &rx_bits, &self.cfg.plan)?;
            Ok(FrameOutcome { ber, estimate })
        };
        run().map_err(|e| Error::Frame {
            index,
            source: Box::new(e),
        })
    }

    /// Runs `n_frames` frames on `threads` workers (0 picks the number of
    /// CPUs) and reduces them in frame order.
    pub fn run(&self, n_frames: u64, master_seed: u64, threads: usize) -> Result<LinkReport> {
        if n_frames == 0 {
            return Err(Error::Config("at least one frame must be simulated".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let outcomes: Vec<Result<FrameOutcome>> = pool.install(|| {
            (0..n_frames)
                .into_par_iter()
                .map_init(
                    || self.worker(),
                    |worker, index| match worker {
                        Ok(w) => self.simulate_frame(w, master_seed, index),
                        Err(e) => Err(e.clone()),
                    },
                )
                .collect()
        });
        let mut ber = BerReport::empty(self.cfg.plan.l_bands());
        let mut mean_sigma2 = vec![0.0; self.cfg.plan.b_total()];
        let mut mean_sigma2_band = vec![0.0; self.cfg.plan.l_bands()];
        for outcome in outcomes {
            let outcome = outcome?;
            ber.merge(&outcome.ber)?;
            for (acc, v) in mean_sigma2.iter_mut().zip(&outcome.estimate.sigma2) {
                *acc += v;
            }
            for (acc, v) in mean_sigma2_band.iter_mut().zip(&outcome.estimate.sigma2_band) {
                *acc += v;
            }
        }
        let scale = 1.0 / n_frames as f64;
        mean_sigma2.iter_mut().for_each(|v| *v *= scale);
        mean_sigma2_band.iter_mut().for_each(|v| *v *= scale);
        Ok(LinkReport {
            frames: n_frames,
            ber,
            mean_sigma2,
            mean_sigma2_band,
        })
    }
}
