//! Receiver chain: training-based channel estimation, zero-forcing,
//! per-band noise averaging, sequence detection and error counting.

use crate::constellation::Constellation;
use crate::error::{check_len, Error, Result};
use crate::modem::BandPlan;
use crate::precoder::NomMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::cmp::Ordering;

/// Smallest channel gain magnitude the equaliser will invert.
pub const MIN_GAIN: f64 = 1e-12;

/// Per-bin channel state recovered from the training blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RxEstimate {
    /// Complex gain per occupied bin.
    pub h: Vec<Complex64>,
    /// Post-ZF noise variance per occupied bin.
    pub sigma2: Vec<f64>,
    /// Noise variance shared by every symbol of a band.
    pub sigma2_band: Vec<f64>,
}

/// Least-squares gain and noise estimate from known training blocks.
///
/// `h[b]` is the block average of `rx / known`; `sigma2[b]` is the sample
/// variance (over blocks) of the equalised residual `rx / h - known`.
pub fn estimate_channel(rx_ts: &[Vec<Complex64>], known_ts: &[Vec<Complex64>], plan: &BandPlan) -> Result<RxEstimate> {
    check_len("training blocks", known_ts.len(), rx_ts.len())?;
    let blocks = rx_ts.len();
    if blocks < 2 {
        return Err(Error::Config(format!(
            "channel estimation needs at least 2 training blocks, got {blocks}"
        )));
    }
    let bins = plan.b_total();
    for (rx, known) in rx_ts.iter().zip(known_ts) {
        check_len("received training bins", bins, rx.len())?;
        check_len("known training bins", bins, known.len())?;
    }
    let mut h = vec![Complex64::new(0.0, 0.0); bins];
    for (rx, known) in rx_ts.iter().zip(known_ts) {
        for ((acc, r), k) in h.iter_mut().zip(rx).zip(known) {
            *acc += r / k;
        }
    }
    for v in h.iter_mut() {
        *v /= blocks as f64;
    }
    check_gains(&h)?;
    let mut sigma2 = vec![0.0; bins];
    for (rx, known) in rx_ts.iter().zip(known_ts) {
        for (((acc, r), k), g) in sigma2.iter_mut().zip(rx).zip(known).zip(&h) {
            *acc += (r / g - k).norm_sqr();
        }
    }
    for v in sigma2.iter_mut() {
        *v /= (blocks - 1) as f64;
    }
    let sigma2_band = band_noise_variance(&sigma2, plan)?;
    Ok(RxEstimate { h, sigma2, sigma2_band })
}

fn check_gains(h: &[Complex64]) -> Result<()> {
    match h.iter().position(|g| !(g.norm() >= MIN_GAIN)) {
        Some(b) => Err(Error::DegenerateChannel {
            bin: b,
            magnitude: h[b].norm(),
        }),
        None => Ok(()),
    }
}

/// Per-bin division by the estimated gain.
pub fn zf_equalize(y: &[Complex64], est: &RxEstimate) -> Result<Vec<Complex64>> {
    check_len("equaliser input", est.h.len(), y.len())?;
    check_gains(&est.h)?;
    Ok(y.iter().zip(&est.h).map(|(v, g)| v / g).collect())
}

/// Band noise variance: the sum of the band's `m` per-bin variances divided
/// by its `n` original subcarriers. Precoding spreads the noise of the `m`
/// occupied bins evenly over all `n` symbol positions.
pub fn band_noise_variance(sigma2: &[f64], plan: &BandPlan) -> Result<Vec<f64>> {
    check_len("per-bin noise variances", plan.b_total(), sigma2.len())?;
    Ok(plan
        .coeff_ranges()
        .into_iter()
        .zip(plan.bands())
        .map(|(range, band)| sigma2[range].iter().sum::<f64>() / band.n as f64)
        .collect())
}

/// Order in which symbol positions are visited by the tree search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchOrder {
    /// Low to high subcarrier index.
    #[default]
    Ascending,
    Descending,
}

/// Tree-search settings shared by all bands.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectorConfig {
    /// Survivor count per band; missing entries default to the band's QAM
    /// order.
    pub survivors: Vec<usize>,
    /// Keep every path (exact ML search).
    pub exhaustive: bool,
    pub order: SearchOrder,
}

impl DetectorConfig {
    pub fn exhaustive() -> Self {
        Self {
            exhaustive: true,
            ..Self::default()
        }
    }

    pub fn with_survivors(survivors: Vec<usize>) -> Self {
        Self {
            survivors,
            ..Self::default()
        }
    }

    /// Survivor count for band `band` carrying QAM order `q`.
    pub fn survivors_for(&self, band: usize, q: usize) -> usize {
        if self.exhaustive {
            usize::MAX
        } else {
            self.survivors.get(band).copied().unwrap_or(q)
        }
    }

    pub fn validate(&self, plan: &BandPlan) -> Result<()> {
        if let Some(pos) = self.survivors.iter().position(|&c| c == 0) {
            return Err(Error::Config(format!("band {} has zero survivors", pos + 1)));
        }
        if !self.survivors.is_empty() && self.survivors.len() != plan.l_bands() {
            return Err(Error::Config(format!(
                "{} survivor counts given for {} bands",
                self.survivors.len(),
                plan.l_bands()
            )));
        }
        Ok(())
    }
}

/// Output of one band's sequence detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Decided label per symbol position.
    pub labels: Vec<usize>,
    /// `||y - A s||^2 - ||y||^2` of the decided sequence.
    pub metric: f64,
    /// `metric / sigma_hat` (equal to `metric` when the variance is zero).
    pub scaled_metric: f64,
}

impl Detection {
    pub fn symbols(&self, c: &Constellation) -> Vec<Complex64> {
        self.labels.iter().map(|&l| c.point(l)).collect()
    }

    pub fn bits(&self, c: &Constellation) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.labels.len() * c.bits_per_symbol());
        for &l in &self.labels {
            c.push_label_bits(l, &mut out);
        }
        out
    }
}

/// Upper bound on paths kept by an exhaustive search.
pub const MAX_EXHAUSTIVE_PATHS: usize = 1 << 22;

/// Breadth-first M-algorithm over the symbol positions of one band.
///
/// Works on the soft values `z = A^H y` with the Gram matrix `G = A^H A`.
/// Partial paths are ranked in a whitened form: with
/// `G + lambda I = L^H L` (`L` lower triangular in visiting order) and
/// `L^H w = z`, extending a path by `s_k` costs
/// `|w_k - sum_{j<=k} L[k,j] s_j|^2 - |w_k|^2 - lambda |s_k|^2`.
/// The loading `lambda` keeps `L` invertible when `G` is rank deficient and
/// cancels over a full path, whose metric is `||y - A s||^2 - ||y||^2`, so
/// exhaustive search is exact ML. After every stage the `survivors` best
/// paths are kept, ties resolved in favour of the lexicographically
/// smaller label sequence.
///
/// Holds reusable buffers; use one instance per worker and band.
pub struct SequenceDetector {
    n: usize,
    // whitening factor in visiting order, row-major lower triangle
    chol: Vec<Complex64>,
    lambda: f64,
    order: Vec<usize>,
    points: Vec<Complex64>,
    energy: Vec<f64>,
    survivors: usize,
    w: Vec<Complex64>,
    // survivor paths, row-major `[path][stage]` in visiting order
    paths: Vec<u8>,
    metrics: Vec<f64>,
    next_paths: Vec<u8>,
    next_metrics: Vec<f64>,
    candidates: Vec<Candidate>,
    interference: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    metric: f64,
    parent: u32,
    label: u8,
}

/// Diagonal loading of the Gram matrix used for the whitened ranking.
pub const WHITENING_LOAD: f64 = 0.01;

impl SequenceDetector {
    pub fn new(nom: &NomMatrix, constellation: &Constellation, survivors: usize, order: SearchOrder) -> Result<Self> {
        if survivors == 0 {
            return Err(Error::Config("survivor count must be at least 1".into()));
        }
        let q = constellation.order();
        if q == 0 || q > 256 {
            return Err(Error::Config(format!("alphabet size {q} not searchable")));
        }
        let n = nom.n();
        let total_paths = (q as f64).powi(n as i32);
        let survivors = if survivors == usize::MAX {
            if total_paths > MAX_EXHAUSTIVE_PATHS as f64 {
                return Err(Error::Config(format!(
                    "exhaustive search over {q}^{n} sequences is too large"
                )));
            }
            total_paths as usize
        } else {
            survivors.min(total_paths.min(usize::MAX as f64) as usize).max(1)
        };
        let lambda = WHITENING_LOAD;
        let g = nom.gram();
        let order: Vec<usize> = match order {
            SearchOrder::Ascending => (0..n).collect(),
            SearchOrder::Descending => (0..n).rev().collect(),
        };
        // G + lambda I = L^H L with L lower: factor the index-reversed
        // matrix as C C^H and read L = J C^H J
        let loaded = DMatrix::from_fn(n, n, |a, b| {
            let v = g[(order[n - 1 - a], order[n - 1 - b])];
            if a == b {
                v + lambda
            } else {
                v
            }
        });
        let c = loaded
            .cholesky()
            .ok_or_else(|| Error::Integrity("loaded Gram matrix is not positive definite".into()))?
            .l();
        let mut chol = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            for j in 0..=k {
                chol[k * n + j] = c[(n - 1 - j, n - 1 - k)].conj();
            }
        }
        let points = constellation.points().to_vec();
        let energy = points.iter().map(|p| p.norm_sqr()).collect();
        Ok(Self {
            n,
            chol,
            lambda,
            order,
            points,
            energy,
            survivors,
            w: Vec::new(),
            paths: Vec::new(),
            metrics: Vec::new(),
            next_paths: Vec::new(),
            next_metrics: Vec::new(),
            candidates: Vec::new(),
            interference: Vec::new(),
        })
    }

    /// Effective survivor count after clamping to the tree size.
    pub fn survivors(&self) -> usize {
        self.survivors
    }

    /// Detects one band. `sigma_hat` only scales the reported metric.
    pub fn detect(&mut self, z: &[Complex64], sigma_hat: f64) -> Result<Detection> {
        check_len("detector input", self.n, z.len())?;
        if !(sigma_hat.is_finite() && sigma_hat >= 0.0) {
            return Err(Error::Config(format!("noise variance {sigma_hat} must be >= 0")));
        }
        let n = self.n;
        // back substitution for L^H w = z (L^H upper triangular)
        self.w.clear();
        self.w.extend(self.order.iter().map(|&i| z[i]));
        for k in (0..n).rev() {
            let mut acc = self.w[k];
            for j in k + 1..n {
                acc -= self.chol[j * n + k].conj() * self.w[j];
            }
            self.w[k] = acc / self.chol[k * n + k].re;
        }
        self.paths.clear();
        self.metrics.clear();
        self.metrics.push(0.0);
        let mut depth = 0;
        for stage in 0..n {
            let w_k = self.w[stage];
            let w_energy = w_k.norm_sqr();
            let l_kk = self.chol[stage * n + stage].re;
            let row = &self.chol[stage * n..stage * n + stage];
            let alive = self.metrics.len();
            self.interference.clear();
            for p in 0..alive {
                let path = &self.paths[p * depth..(p + 1) * depth];
                let c: Complex64 = row
                    .iter()
                    .zip(path)
                    .map(|(g, &l)| g * self.points[l as usize])
                    .sum();
                self.interference.push(w_k - c);
            }
            self.candidates.clear();
            for p in 0..alive {
                let r = self.interference[p];
                for (label, (pt, e)) in self.points.iter().zip(&self.energy).enumerate() {
                    let inc = (r - pt * l_kk).norm_sqr() - w_energy - self.lambda * e;
                    self.candidates.push(Candidate {
                        metric: self.metrics[p] + inc,
                        parent: p as u32,
                        label: label as u8,
                    });
                }
            }
            let keep = self.candidates.len().min(self.survivors);
            if keep < self.candidates.len() {
                let paths = &self.paths;
                let cmp = |a: &Candidate, b: &Candidate| rank(a, b, paths, depth);
                self.candidates.select_nth_unstable_by(keep - 1, cmp);
                self.candidates.truncate(keep);
                self.candidates.sort_unstable_by(cmp);
            }
            // With every path kept, parents are in lexicographic order and the
            // candidates inherit it.
            self.next_paths.clear();
            self.next_metrics.clear();
            for cand in &self.candidates {
                let p = cand.parent as usize;
                self.next_paths.extend_from_slice(&self.paths[p * depth..(p + 1) * depth]);
                self.next_paths.push(cand.label);
                self.next_metrics.push(cand.metric);
            }
            std::mem::swap(&mut self.paths, &mut self.next_paths);
            std::mem::swap(&mut self.metrics, &mut self.next_metrics);
            depth += 1;
        }
        let scale: f64 = z.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let best = pick_best(&self.metrics, &self.paths, n, scale);
        let mut labels = vec![0; n];
        for (stage, &l) in self.paths[best * n..(best + 1) * n].iter().enumerate() {
            labels[self.order[stage]] = l as usize;
        }
        let metric = self.metrics[best];
        let scaled_metric = if sigma_hat > 0.0 { metric / sigma_hat } else { metric };
        Ok(Detection {
            labels,
            metric,
            scaled_metric,
        })
    }
}

fn rank(a: &Candidate, b: &Candidate, paths: &[u8], depth: usize) -> Ordering {
    a.metric.total_cmp(&b.metric).then_with(|| {
        let pa = &paths[a.parent as usize * depth..(a.parent as usize + 1) * depth];
        let pb = &paths[b.parent as usize * depth..(b.parent as usize + 1) * depth];
        pa.cmp(pb).then(a.label.cmp(&b.label))
    })
}

/// Relative tolerance under which two full-path metrics count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Index of the lowest metric; metrics within the tie tolerance of the
/// minimum are resolved by the lexicographically smallest path.
fn pick_best(metrics: &[f64], paths: &[u8], n: usize, scale: f64) -> usize {
    let min = metrics.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = TIE_TOLERANCE * (1.0 + min.abs() + scale);
    let mut best: Option<usize> = None;
    for (i, &m) in metrics.iter().enumerate() {
        if m <= min + tol {
            best = match best {
                Some(b) if paths[b * n..(b + 1) * n] <= paths[i * n..(i + 1) * n] => Some(b),
                _ => Some(i),
            };
        }
    }
    best.unwrap_or(0)
}

/// One-shot sequence detection for a single band.
pub fn viterbi_detect(
    z: &[Complex64],
    nom: &NomMatrix,
    sigma_hat: f64,
    constellation: &Constellation,
    survivors: usize,
    order: SearchOrder,
) -> Result<Detection> {
    SequenceDetector::new(nom, constellation, survivors, order)?.detect(z, sigma_hat)
}

/// Bit-error counts of one band (or the aggregate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorCount {
    pub errors: u64,
    pub bits: u64,
}

impl ErrorCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    fn add(&mut self, other: &ErrorCount) {
        self.errors += other.errors;
        self.bits += other.bits;
    }
}

/// Per-band and aggregate error statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BerReport {
    pub per_band: Vec<ErrorCount>,
}

impl BerReport {
    pub fn empty(l_bands: usize) -> Self {
        Self {
            per_band: vec![ErrorCount::default(); l_bands],
        }
    }

    pub fn overall(&self) -> ErrorCount {
        let mut total = ErrorCount::default();
        for c in &self.per_band {
            total.add(c);
        }
        total
    }

    pub fn band_ber(&self) -> Vec<f64> {
        self.per_band.iter().map(ErrorCount::ber).collect()
    }

    /// `max(ber) / mean(ber)` over bands; 1 when no band has errors.
    pub fn flatness(&self) -> f64 {
        let bers = self.band_ber();
        let mean = bers.iter().sum::<f64>() / bers.len() as f64;
        if mean == 0.0 {
            return 1.0;
        }
        bers.iter().cloned().fold(0.0, f64::max) / mean
    }

    /// Adds another report with the same band layout.
    pub fn merge(&mut self, other: &BerReport) -> Result<()> {
        check_len("bands in merged report", self.per_band.len(), other.per_band.len())?;
        for (a, b) in self.per_band.iter_mut().zip(&other.per_band) {
            a.add(b);
        }
        Ok(())
    }
}

/// Compares bit streams made of whole OFDM blocks, each block holding the
/// bits of band 1, then band 2, and so on.
pub fn count_errors(tx_bits: &[u8], rx_bits: &[u8], plan: &BandPlan) -> Result<BerReport> {
    check_len("received bit stream", tx_bits.len(), rx_bits.len())?;
    let per_block = plan.bits_per_block();
    if !tx_bits.len().is_multiple_of(per_block) {
        return Err(Error::Framing {
            what: "bit stream not a whole number of blocks",
            expected: tx_bits.len().div_ceil(per_block) * per_block,
            got: tx_bits.len(),
        });
    }
    let band_bits = plan.band_bits();
    let mut report = BerReport::empty(plan.l_bands());
    for (tx, rx) in tx_bits.chunks_exact(per_block).zip(rx_bits.chunks_exact(per_block)) {
        let mut offset = 0;
        for (count, &len) in report.per_band.iter_mut().zip(&band_bits) {
            let errors = tx[offset..offset + len]
                .iter()
                .zip(&rx[offset..offset + len])
                .filter(|(a, b)| a != b)
                .count();
            count.errors += errors as u64;
            count.bits += len as u64;
            offset += len;
        }
    }
    Ok(report)
}
