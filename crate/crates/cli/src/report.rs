//! Simulation of sweep points and their CSV rows.

use crate::config::{RunConfig, Scheme, SweepParam};
use crate::CliError;
use nofdm_core::link::LinkSimulator;
use nofdm_core::modem::{line_rate, occupied_bandwidth, BandPlan};
use nofdm_core::planner::{complexity_reduction, to_f64, ComplexityReport};
use nofdm_core::receiver::{BerReport, DetectorConfig};
use std::io::Write;

pub const COLUMNS: [&str; 22] = [
    "param",
    "value",
    "l_bands",
    "alpha",
    "alpha_eff",
    "qam",
    "band_alpha",
    "bits",
    "bit_errors",
    "ber",
    "flatness",
    "band_ber",
    "band_bits",
    "band_errors",
    "line_rate_gbps",
    "occupied_bw_ghz",
    "cm_approx",
    "ca_approx",
    "cm_reduction",
    "ca_reduction",
    "seed",
    "frames",
];

/// One simulated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub param: Option<SweepParam>,
    pub value: f64,
    pub plan: BandPlan,
    pub ber: BerReport,
    pub line_rate: f64,
    pub occupied_bw: f64,
    pub complexity: ComplexityReport,
    pub seed: u64,
    pub frames: u64,
}

/// The single-band plan complexity reductions are measured against.
pub fn baseline(cfg: &RunConfig) -> Result<BandPlan, CliError> {
    let alpha = match cfg.plan.scheme {
        Scheme::Nom => cfg.plan.alpha,
        Scheme::Chow => 1.0,
    };
    BandPlan::uniform(cfg.plan.v_total, alpha, &[8]).map_err(|e| CliError::Config(e.to_string()))
}

pub fn complexity(cfg: &RunConfig) -> Result<ComplexityReport, CliError> {
    let link = cfg.link()?;
    Ok(complexity_reduction(
        &link.plan,
        &link.detector,
        &baseline(cfg)?,
        &DetectorConfig::default(),
    ))
}

/// Runs one configuration. Errors raised while building the link are
/// configuration errors; errors inside frames are runtime errors.
pub fn simulate(
    param: Option<SweepParam>,
    value: f64,
    cfg: &RunConfig,
    threads: usize,
) -> Result<Row, CliError> {
    let link = cfg.link()?;
    let complexity = complexity(cfg)?;
    let sim = LinkSimulator::new(link).map_err(CliError::from_core)?;
    let report = sim
        .run(cfg.run.frames, cfg.run.seed, threads)
        .map_err(CliError::from_core)?;
    let link = sim.config();
    Ok(Row {
        param,
        value,
        line_rate: line_rate(&link.plan, &link.frame),
        occupied_bw: occupied_bandwidth(&link.plan, &link.frame),
        plan: link.plan.clone(),
        ber: report.ber,
        complexity,
        seed: cfg.run.seed,
        frames: cfg.run.frames,
    })
}

pub fn format_ber(ber: f64) -> String {
    format!("{ber:.5e}")
}

fn join<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.into_iter().map(f).collect::<Vec<_>>().join(";")
}

impl Row {
    pub fn fields(&self) -> Vec<String> {
        let overall = self.ber.overall();
        let (cm_red, ca_red) = self.complexity.reduction();
        vec![
            self.param.map(|p| p.name().to_string()).unwrap_or_default(),
            if self.value.is_nan() { String::new() } else { format!("{}", self.value) },
            self.plan.l_bands().to_string(),
            format!("{}", self.plan.alpha()),
            format!("{:.6}", self.plan.effective_alpha()),
            join(self.plan.qam_orders(), |q| q.to_string()),
            join(self.plan.bands(), |b| format!("{:.6}", b.alpha())),
            overall.bits.to_string(),
            overall.errors.to_string(),
            format_ber(overall.ber()),
            format!("{:.6}", self.ber.flatness()),
            join(&self.ber.per_band, |b| format_ber(b.ber())),
            join(&self.ber.per_band, |b| b.bits.to_string()),
            join(&self.ber.per_band, |b| b.errors.to_string()),
            format!("{:.4}", self.line_rate / 1e9),
            format!("{:.4}", self.occupied_bw / 1e9),
            format!("{:.3}", to_f64(self.complexity.approx.cm)),
            format!("{:.3}", to_f64(self.complexity.approx.ca)),
            format!("{:.6}", cm_red),
            format!("{:.6}", ca_red),
            self.seed.to_string(),
            self.frames.to_string(),
        ]
    }
}

/// Writes rows as CSV with a header and LF line endings.
pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| CliError::Runtime(format!("writing CSV: {e}"));
    w.write_record(COLUMNS).map_err(io)?;
    for row in rows {
        w.write_record(row.fields()).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("writing CSV: {e}")))
}
