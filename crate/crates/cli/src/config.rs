//! TOML run configuration.
//!
//! ```toml
//! [plan]
//! alpha = 0.9
//! qam = [16, 8, 4]
//!
//! [channel]
//! preset = "paper-20km"
//! noise_psd = 0.008
//!
//! [run]
//! seed = 1
//! frames = 14
//!
//! [sweep]
//! param = "alpha"
//! values = [1.0, 0.9, 0.8]
//! ```
//!
//! Every section is optional; omitted keys take the defaults below.

use crate::CliError;
use nofdm_core::channel::{parse_table, ChannelProfile};
use nofdm_core::link::LinkConfig;
use nofdm_core::modem::{BandPlan, FrameConfig};
use nofdm_core::planner::{allocation_profile, chow_plan, FourBandVariant, DEFAULT_GAP_DB};
use nofdm_core::receiver::{DetectorConfig, SearchOrder};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub frame: FrameSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    /// Directory relative paths in the file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Uniform NOM-precoded sub-bands.
    Nom,
    /// Chow bit loading over uncompressed subcarriers.
    Chow,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_v_total")]
    pub v_total: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Explicit QAM order per sub-band; overrides `l_bands`.
    pub qam: Option<Vec<usize>>,
    /// Number of sub-bands, taking the shipped allocation profile.
    pub l_bands: Option<usize>,
    /// Four-band profile, "A" = [16,16,4,4] or "B" = [16,16,8,2].
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default = "default_target_bits")]
    pub target_bits: usize,
    #[serde(default = "default_gap")]
    pub gap_db: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Nom
}
fn default_v_total() -> usize {
    120
}
fn default_alpha() -> f64 {
    1.0
}
fn default_variant() -> String {
    "A".into()
}
fn default_target_bits() -> usize {
    360
}
fn default_gap() -> f64 {
    DEFAULT_GAP_DB
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            scheme: default_scheme(),
            v_total: default_v_total(),
            alpha: default_alpha(),
            qam: None,
            l_bands: None,
            variant: default_variant(),
            target_bits: default_target_bits(),
            gap_db: default_gap(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    pub n_fft: Option<usize>,
    pub cp_len: Option<usize>,
    pub n_ts: Option<usize>,
    pub n_payload: Option<usize>,
    pub sample_rate: Option<f64>,
    pub fft_backoff: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// A shipped preset; mutually exclusive with `kind`.
    pub preset: Option<String>,
    /// "flat", "gaussian_lowpass" or "tabulated".
    pub kind: Option<String>,
    pub f_3db: Option<f64>,
    /// Inline `[[hz, db], ...]` table.
    pub table: Option<Vec<(f64, f64)>>,
    /// Table file, relative to the config file.
    pub table_file: Option<PathBuf>,
    #[serde(default)]
    pub noise_psd: f64,
    #[serde(default)]
    pub rop_dbm: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    /// Survivors per band; defaults to the band's QAM order.
    pub survivors: Option<Vec<usize>>,
    #[serde(default)]
    pub exhaustive: bool,
    pub order: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_frames")]
    pub frames: u64,
}

fn default_frames() -> u64 {
    14
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: default_frames(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    LBands,
    RopDbm,
    NoisePsd,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::LBands => "l_bands",
            SweepParam::RopDbm => "rop_dbm",
            SweepParam::NoisePsd => "noise_psd",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    #[serde(default)]
    pub values: Vec<f64>,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(config_err)?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn frame(&self) -> FrameConfig {
        let d = FrameConfig::default();
        let f = &self.frame;
        FrameConfig {
            n_fft: f.n_fft.unwrap_or(d.n_fft),
            cp_len: f.cp_len.unwrap_or(d.cp_len),
            n_ts: f.n_ts.unwrap_or(d.n_ts),
            n_payload: f.n_payload.unwrap_or(d.n_payload),
            sample_rate: f.sample_rate.unwrap_or(d.sample_rate),
            fft_backoff: f.fft_backoff.unwrap_or(d.fft_backoff),
        }
    }

    pub fn channel(&self) -> Result<ChannelProfile, CliError> {
        let c = &self.channel;
        let base = match (&c.preset, c.kind.as_deref()) {
            (Some(_), Some(_)) => return Err(config_err("[channel] takes either `preset` or `kind`, not both")),
            (Some(name), None) => ChannelProfile::preset(name).map_err(config_err)?,
            (None, None) | (None, Some("flat")) => ChannelProfile::flat(),
            (None, Some("gaussian_lowpass")) => {
                let f = c.f_3db.ok_or_else(|| config_err("gaussian_lowpass needs `f_3db`"))?;
                ChannelProfile::gaussian_lowpass(f)
            }
            (None, Some("tabulated")) => {
                let table = match (&c.table, &c.table_file) {
                    (Some(t), None) => t.clone(),
                    (None, Some(file)) => {
                        let path = self.base_dir.join(file);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                        parse_table(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                    }
                    _ => return Err(config_err("tabulated channel needs exactly one of `table`, `table_file`")),
                };
                ChannelProfile::tabulated(table).map_err(config_err)?
            }
            (None, Some(other)) => return Err(config_err(format!("unknown channel kind '{other}'"))),
        };
        let profile = base.with_noise(c.noise_psd).with_rop(c.rop_dbm);
        profile.validate().map_err(config_err)?;
        Ok(profile)
    }

    fn qam_orders(&self) -> Result<Vec<usize>, CliError> {
        let p = &self.plan;
        if let Some(q) = &p.qam {
            return Ok(q.clone());
        }
        allocation_profile(p.l_bands.unwrap_or(1), self.variant()?).map_err(config_err)
    }

    fn variant(&self) -> Result<FourBandVariant, CliError> {
        match self.plan.variant.as_str() {
            "A" | "a" => Ok(FourBandVariant::A),
            "B" | "b" => Ok(FourBandVariant::B),
            other => Err(config_err(format!("unknown four-band variant '{other}'"))),
        }
    }

    pub fn plan(&self) -> Result<BandPlan, CliError> {
        let p = &self.plan;
        match p.scheme {
            Scheme::Nom => BandPlan::uniform(p.v_total, p.alpha, &self.qam_orders()?).map_err(config_err),
            Scheme::Chow => chow_plan(&self.channel()?, &self.frame(), p.v_total, p.target_bits, p.gap_db)
                .map_err(config_err),
        }
    }

    pub fn detector(&self) -> Result<DetectorConfig, CliError> {
        let d = &self.detector;
        let order = match d.order.as_deref() {
            None | Some("ascending") => SearchOrder::Ascending,
            Some("descending") => SearchOrder::Descending,
            Some(other) => return Err(config_err(format!("unknown search order '{other}'"))),
        };
        let mut det = if d.exhaustive {
            if d.survivors.is_some() {
                return Err(config_err("`survivors` and `exhaustive` are mutually exclusive"));
            }
            DetectorConfig::exhaustive()
        } else {
            match &d.survivors {
                Some(s) => DetectorConfig::with_survivors(s.clone()),
                None => DetectorConfig::default(),
            }
        };
        det.order = order;
        Ok(det)
    }

    pub fn link(&self) -> Result<LinkConfig, CliError> {
        let link = LinkConfig {
            plan: self.plan()?,
            frame: self.frame(),
            channel: self.channel()?,
            detector: self.detector()?,
        };
        link.frame.validate(&link.plan).map_err(config_err)?;
        link.detector.validate(&link.plan).map_err(config_err)?;
        Ok(link)
    }

    /// The configuration with one swept parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self, CliError> {
        let mut cfg = self.clone();
        match param {
            SweepParam::Alpha => cfg.plan.alpha = value,
            SweepParam::LBands => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(config_err(format!("l_bands value {value} is not a positive integer")));
                }
                if cfg.plan.scheme == Scheme::Chow {
                    return Err(config_err("l_bands cannot be swept for a bit-loaded plan"));
                }
                cfg.plan.qam = None;
                cfg.plan.l_bands = Some(value as usize);
                // per-band survivor lists do not carry over to another band count
                cfg.detector.survivors = None;
            }
            SweepParam::RopDbm => cfg.channel.rop_dbm = value,
            SweepParam::NoisePsd => cfg.channel.noise_psd = value,
        }
        Ok(cfg)
    }

    /// `(param, value, config)` per sweep point; a single unnamed point
    /// without a sweep.
    pub fn points(&self) -> Result<Vec<(Option<SweepParam>, f64, RunConfig)>, CliError> {
        match &self.sweep {
            Some(s) if !s.values.is_empty() => s
                .values
                .iter()
                .map(|&v| Ok((Some(s.param), v, self.with_param(s.param, v)?)))
                .collect(),
            _ => Ok(vec![(None, f64::NAN, self.clone())]),
        }
    }
}
