//! Subcommand implementations. Every file goes under the output directory.

use crate::config::RunConfig;
use crate::plot::{emit_ber_plot, psd_plot_svg};
use crate::report::{complexity, simulate, write_csv, Row};
use crate::CliError;
use nofdm_core::channel::{apply_channel, measure_spectrum, spectral_edge, PRESETS};
use nofdm_core::link::{frame_seed, LinkSimulator};
use nofdm_core::planner::{allocation_profile, to_f64, FourBandVariant};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Options shared by the simulation subcommands.
#[derive(Debug, Clone)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub frames: Option<u64>,
    pub out: PathBuf,
    pub threads: usize,
}

impl Options {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(frames) = self.frames {
            cfg.run.frames = frames;
        }
        Ok(cfg)
    }

    fn output(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_rows(opts: &Options, stem: &str, rows: &[Row]) -> Result<Vec<PathBuf>, CliError> {
    let csv_path = opts.output(&format!("{stem}.csv"))?;
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    write_file(&csv_path, &buf)?;
    let svg_path = emit_ber_plot(&csv_path)?;
    Ok(vec![csv_path, svg_path])
}

fn summarize(out: &mut impl Write, row: &Row) {
    let overall = row.ber.overall();
    let label = match row.param {
        Some(p) => format!("{}={} ", p.name(), row.value),
        None => String::new(),
    };
    let _ = writeln!(
        out,
        "{label}L={} alpha={} BER={:.3e} ({} errors / {} bits) flatness={:.3}",
        row.plan.l_bands(),
        row.plan.alpha(),
        overall.ber(),
        overall.errors,
        overall.bits,
        row.ber.flatness()
    );
}

/// Simulates the configured plan once (any sweep section is ignored).
pub fn run(opts: &Options, out: &mut impl Write) -> Result<Vec<PathBuf>, CliError> {
    let cfg = opts.load()?;
    let start = Instant::now();
    let row = simulate(None, f64::NAN, &cfg, opts.threads)?;
    summarize(out, &row);
    let _ = writeln!(out, "wall-clock {:.2} s", start.elapsed().as_secs_f64());
    write_rows(opts, "run", &[row])
}

/// Simulates every sweep point in order.
pub fn sweep(opts: &Options, out: &mut impl Write) -> Result<Vec<PathBuf>, CliError> {
    let cfg = opts.load()?;
    let points = cfg.points()?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(points.len());
    for (param, value, point) in points {
        let row = simulate(param, value, &point, opts.threads)?;
        summarize(out, &row);
        rows.push(row);
    }
    let _ = writeln!(out, "wall-clock {:.2} s", start.elapsed().as_secs_f64());
    write_rows(opts, "sweep", &rows)
}

pub const COMPLEXITY_COLUMNS: [&str; 13] = [
    "param",
    "value",
    "qam",
    "cm_exact",
    "ca_exact",
    "cm_approx",
    "ca_approx",
    "baseline_cm_approx",
    "baseline_ca_approx",
    "cm_reduction",
    "ca_reduction",
    "cm_reduction_exact",
    "ca_reduction_exact",
];

/// Operation counts of the plan (or of every sweep point) against the
/// single-band 8QAM plan.
pub fn complexity_table(opts: &Options, out: &mut impl Write) -> Result<Vec<PathBuf>, CliError> {
    let cfg = opts.load()?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(format!("writing CSV: {e}"));
    w.write_record(COMPLEXITY_COLUMNS).map_err(io)?;
    for (param, value, point) in cfg.points()? {
        let plan = point.plan()?;
        let rep = complexity(&point)?;
        let (cm, ca) = rep.reduction();
        let (cm_x, ca_x) = rep.reduction_exact();
        let qam = plan.qam_orders().iter().map(|q| q.to_string()).collect::<Vec<_>>().join(";");
        let _ = writeln!(
            out,
            "[{qam}] alpha={}: CM {:.2}% / CA {:.2}% fewer operations than single-band 8QAM",
            plan.alpha(),
            100.0 * cm,
            100.0 * ca
        );
        w.write_record([
            param.map(|p| p.name().to_string()).unwrap_or_default(),
            if value.is_nan() { String::new() } else { format!("{value}") },
            qam,
            format!("{:.3}", to_f64(rep.exact.cm)),
            format!("{:.3}", to_f64(rep.exact.ca)),
            format!("{:.3}", to_f64(rep.approx.cm)),
            format!("{:.3}", to_f64(rep.approx.ca)),
            format!("{:.3}", to_f64(rep.baseline_approx.cm)),
            format!("{:.3}", to_f64(rep.baseline_approx.ca)),
            format!("{cm:.6}"),
            format!("{ca:.6}"),
            format!("{cm_x:.6}"),
            format!("{ca_x:.6}"),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    let path = opts.output("complexity.csv")?;
    write_file(&path, &bytes)?;
    Ok(vec![path])
}

/// Level, relative to the peak, that defines the occupied-band edge.
pub const EDGE_THRESHOLD_DB: f64 = -10.0;
const PSD_FLOOR_DB: f64 = -60.0;

/// Welch spectrum of one frame of the configured signal, before and after
/// the channel.
pub fn spectrum(opts: &Options, out: &mut impl Write) -> Result<Vec<PathBuf>, CliError> {
    let cfg = opts.load()?;
    let link = cfg.link()?;
    let sim = LinkSimulator::new(link.clone()).map_err(CliError::from_core)?;
    let mut worker = sim.worker().map_err(CliError::from_core)?;
    let (tx, _) = sim
        .transmit(&mut worker, frame_seed(cfg.run.seed, 0, 0))
        .map_err(CliError::from_core)?;
    let rx = apply_channel(&tx, &link.channel, link.frame.sample_rate, frame_seed(cfg.run.seed, 0, 1));
    let fs = link.frame.sample_rate;
    let tx_psd = measure_spectrum(&tx, fs).map_err(CliError::from_core)?;
    let rx_psd = measure_spectrum(&rx, fs).map_err(CliError::from_core)?;
    let edge = spectral_edge(&tx_psd, EDGE_THRESHOLD_DB);
    match edge {
        Some(e) => {
            let _ = writeln!(out, "occupied band edge ({EDGE_THRESHOLD_DB} dB): {:.3} GHz", e / 1e9);
        }
        None => {
            let _ = writeln!(out, "no spectral edge found");
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(format!("writing CSV: {e}"));
    w.write_record(["freq_ghz", "tx_psd_db", "rx_psd_db"]).map_err(io)?;
    for ((f, t), (_, r)) in tx_psd.iter().zip(&rx_psd) {
        w.write_record([format!("{:.6}", f / 1e9), format!("{t:.4}"), format!("{r:.4}")])
            .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv_path = opts.output("spectrum.csv")?;
    write_file(&csv_path, &bytes)?;
    let svg_path = opts.output("spectrum.svg")?;
    write_file(&svg_path, psd_plot_svg(&tx_psd, edge, PSD_FLOOR_DB).as_bytes())?;
    Ok(vec![csv_path, svg_path])
}

/// Lists the shipped channel presets and allocation profiles.
pub fn profiles(out: &mut impl Write) -> Result<(), CliError> {
    let _ = writeln!(out, "channel presets:");
    for (name, description) in PRESETS {
        let _ = writeln!(out, "  {name:<12} {description}");
    }
    let _ = writeln!(out, "allocation profiles (QAM order per sub-band):");
    for l in 1..=5 {
        let a = allocation_profile(l, FourBandVariant::A).map_err(CliError::from_core)?;
        let b = allocation_profile(l, FourBandVariant::B).map_err(CliError::from_core)?;
        if a == b {
            let _ = writeln!(out, "  L={l}  {a:?}");
        } else {
            let _ = writeln!(out, "  L={l}  A {a:?}  B {b:?}");
        }
    }
    Ok(())
}
