//! JSON scenario documents.
//!
//! Every key is optional and falls back to the library default. Angles are in
//! degrees; speed is given as either `speed_kmh` or `speed_mps`.

use std::path::Path;

use fusion_track_core::angle::{deg_to_rad, rad_to_deg};
use fusion_track_core::ekf::FilterConfig;
use fusion_track_core::fogsim::{
    default_links, Architecture, FogInstance, FogTopology, LatencyModel, LinkSpec, NodePattern,
};
use fusion_track_core::measurements::{BeamGrid, NoiseConfig};
use fusion_track_core::runner::SweepSpec;
use fusion_track_core::scenario::{FusionMode, RadioMetadata, ScenarioConfig};
use fusion_track_core::ConfigError;
use serde::{Deserialize, Serialize};

use crate::AppError;

/// Default number of seeds pooled per sweep cell.
pub const DEFAULT_SEEDS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    ImuOnly,
    FiveGOnly,
    Fused,
}

impl From<ModeName> for FusionMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::ImuOnly => FusionMode::ImuOnly,
            ModeName::FiveGOnly => FusionMode::FiveGOnly,
            ModeName::Fused => FusionMode::Fused,
        }
    }
}

impl From<FusionMode> for ModeName {
    fn from(m: FusionMode) -> Self {
        match m {
            FusionMode::ImuOnly => ModeName::ImuOnly,
            FusionMode::FiveGOnly => ModeName::FiveGOnly,
            FusionMode::Fused => ModeName::Fused,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureName {
    Legacy,
    Fog,
}

impl From<ArchitectureName> for Architecture {
    fn from(a: ArchitectureName) -> Self {
        match a {
            ArchitectureName::Legacy => Architecture::Legacy,
            ArchitectureName::Fog => Architecture::Fog,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_range_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_ref_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_dist_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_aoa_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_grid: Option<BeamGridFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_accel_mps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accel_bias_rw_mps2_per_sqrt_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_speed_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_init_pos_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamGridFile {
    pub n_beams_az: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jerk_psd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_init_vel_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_init_accel_mps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obs_variance_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate_chi2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_antennas: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_antennas: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isd_m: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fused_bs: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModeName>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogInstanceFile {
    pub id: u32,
    pub bs_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFile {
    /// `ue`, `bs`, `bs:<id>`, `amf`, `lmf`, `fog` or `fog:<id>`.
    pub a: String,
    pub b: String,
    pub fixed_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FogFile {
    /// Explicit BS ownership. Mutually exclusive with `split`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<FogInstanceFile>>,
    /// Number of fog instances sharing the BSs in contiguous blocks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
    /// Replaces the default link table when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<LinkFile>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmf_report_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architectures: Option<Vec<ArchitectureName>>,
}

/// The whole document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isd_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_lateral_offset_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track_length_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch_dt_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fused_bs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub noise: NoiseFile,
    pub filter: FilterFile,
    pub radio: RadioFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fog: Option<FogFile>,
    /// Profile names to check; all built-in profiles when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub requirements: Option<Vec<String>>,
}

/// A loaded, validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub scenario: ScenarioConfig,
    pub sweep: SweepSpec,
    pub topology: FogTopology,
    pub architectures: Vec<Architecture>,
    pub requirements: Option<Vec<String>>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        serde_json::from_str(text).map_err(|e| AppError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::ConfigRead {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn scenario(&self) -> Result<ScenarioConfig, AppError> {
        let d = ScenarioConfig::default();
        let speed_mps = match (self.speed_kmh, self.speed_mps) {
            (Some(_), Some(_)) => {
                return Err(AppError::Field {
                    field: "speed_kmh",
                    message: "give either speed_kmh or speed_mps, not both".into(),
                })
            }
            (Some(kmh), None) => kmh / 3.6,
            (None, Some(mps)) => mps,
            (None, None) => d.speed_mps,
        };
        if let Some(deg) = self.noise.sigma_aoa_deg {
            if !(deg.is_finite() && deg >= 0.0) {
                return Err(ConfigError::new("noise.sigma_aoa_deg", "finite and >= 0", deg).into());
            }
        }
        let dn = NoiseConfig::default();
        let n = &self.noise;
        let noise = NoiseConfig {
            sigma_range_m: n.sigma_range_m.unwrap_or(dn.sigma_range_m),
            range_ref_m: n.range_ref_m.unwrap_or(dn.range_ref_m),
            range_dist_exponent: n.range_dist_exponent.unwrap_or(dn.range_dist_exponent),
            sigma_aoa_rad: n.sigma_aoa_deg.map(deg_to_rad).unwrap_or(dn.sigma_aoa_rad),
            beam_grid: n.beam_grid.map(|g| BeamGrid {
                n_beams_az: g.n_beams_az,
            }),
            sigma_accel_mps2: n.sigma_accel_mps2.unwrap_or(dn.sigma_accel_mps2),
            accel_bias_rw_mps2_per_sqrt_s: n
                .accel_bias_rw_mps2_per_sqrt_s
                .unwrap_or(dn.accel_bias_rw_mps2_per_sqrt_s),
            sigma_speed_mps: n.sigma_speed_mps.unwrap_or(dn.sigma_speed_mps),
            sigma_init_pos_m: n.sigma_init_pos_m.unwrap_or(dn.sigma_init_pos_m),
        };
        let df = FilterConfig::default();
        let f = &self.filter;
        let filter = FilterConfig {
            jerk_psd: f.jerk_psd.unwrap_or(df.jerk_psd),
            sigma_init_vel_mps: f.sigma_init_vel_mps.unwrap_or(df.sigma_init_vel_mps),
            sigma_init_accel_mps2: f.sigma_init_accel_mps2.unwrap_or(df.sigma_init_accel_mps2),
            obs_variance_floor: f.obs_variance_floor.unwrap_or(df.obs_variance_floor),
            gate_chi2: f.gate_chi2,
        };
        let dr = RadioMetadata::default();
        let r = &self.radio;
        let radio = RadioMetadata {
            carrier_ghz: r.carrier_ghz.unwrap_or(dr.carrier_ghz),
            tx_power_dbm: r.tx_power_dbm.unwrap_or(dr.tx_power_dbm),
            bs_antennas: r.bs_antennas.unwrap_or(dr.bs_antennas),
            ue_antennas: r.ue_antennas.unwrap_or(dr.ue_antennas),
        };
        let config = ScenarioConfig {
            isd_m: self.isd_m.unwrap_or(d.isd_m),
            bs_lateral_offset_m: self.bs_lateral_offset_m.unwrap_or(d.bs_lateral_offset_m),
            track_length_m: self.track_length_m.unwrap_or(d.track_length_m),
            speed_mps,
            epoch_dt_s: self.epoch_dt_s.unwrap_or(d.epoch_dt_s),
            n_fused_bs: self.n_fused_bs.unwrap_or(d.n_fused_bs),
            noise,
            filter,
            seed: self.seed.unwrap_or(d.seed),
            mode: self.mode.map(FusionMode::from).unwrap_or(d.mode),
            warmup_epochs: self.warmup_epochs.unwrap_or(d.warmup_epochs),
            epochs: self.epochs,
            radio,
        };
        config.validate()?;
        Ok(config)
    }

    /// Resolves every section against `scenario` and validates it.
    pub fn experiment(&self) -> Result<Experiment, AppError> {
        let scenario = self.scenario()?;
        let sweep = match &self.sweep {
            None => SweepSpec {
                isd_values: vec![scenario.isd_m],
                n_values: vec![scenario.n_fused_bs],
                modes: vec![scenario.mode],
                seeds: DEFAULT_SEEDS,
            },
            Some(s) => SweepSpec {
                isd_values: s.isd_m.clone().unwrap_or_else(|| vec![scenario.isd_m]),
                n_values: s
                    .n_fused_bs
                    .clone()
                    .unwrap_or_else(|| vec![scenario.n_fused_bs]),
                modes: s
                    .modes
                    .as_ref()
                    .map(|m| m.iter().copied().map(FusionMode::from).collect())
                    .unwrap_or_else(|| FusionMode::ALL.to_vec()),
                seeds: s.seeds.unwrap_or(DEFAULT_SEEDS),
            },
        };
        let non_empty = |field: &'static str, empty: bool| {
            if empty {
                Err(AppError::Field {
                    field,
                    message: "must list at least one value".into(),
                })
            } else {
                Ok(())
            }
        };
        non_empty("sweep.isd_m", sweep.isd_values.is_empty())?;
        non_empty("sweep.n_fused_bs", sweep.n_values.is_empty())?;
        non_empty("sweep.modes", sweep.modes.is_empty())?;
        if sweep.seeds == 0 {
            return Err(ConfigError::new("sweep.seeds", ">= 1", 0.0).into());
        }
        for &isd in &sweep.isd_values {
            for &n in &sweep.n_values {
                ScenarioConfig {
                    isd_m: isd,
                    n_fused_bs: n,
                    ..scenario.clone()
                }
                .validate()?;
            }
        }

        let (topology, architectures) = self.topology(&scenario)?;
        if let Some(names) = &self.requirements {
            for name in names {
                if fusion_track_core::scenario::find_profile(name).is_none() {
                    return Err(AppError::Field {
                        field: "requirements",
                        message: format!("unknown requirement profile {name:?}"),
                    });
                }
            }
        }
        Ok(Experiment {
            scenario,
            sweep,
            topology,
            architectures,
            requirements: self.requirements.clone(),
        })
    }

    fn topology(
        &self,
        scenario: &ScenarioConfig,
    ) -> Result<(FogTopology, Vec<Architecture>), AppError> {
        let fog = self.fog.clone().unwrap_or_default();
        let links = match &fog.links {
            None => default_links(),
            Some(list) => list.iter().map(parse_link).collect::<Result<_, _>>()?,
        };
        let bs_count = scenario.bs_count();
        let mut topology =
            match (&fog.instances, fog.split) {
                (Some(_), Some(_)) => {
                    return Err(AppError::Field {
                        field: "fog.split",
                        message: "give either fog.instances or fog.split, not both".into(),
                    })
                }
                (Some(instances), None) => FogTopology {
                    fog_instances: instances
                        .iter()
                        .map(|i| FogInstance {
                            id: i.id,
                            bs_ids: i.bs_ids.clone(),
                        })
                        .collect(),
                    links,
                    lmf_report_every: 0,
                },
                (None, split) => FogTopology::split_even(bs_count, split.unwrap_or(2), links)
                    .map_err(|e| AppError::Field {
                        field: "fog.split",
                        message: e.to_string(),
                    })?,
            };
        topology.lmf_report_every = fog.lmf_report_every.unwrap_or(0);
        let sites = fusion_track_core::scenario::build_scenario(scenario)?.sites;
        topology.validate(&sites).map_err(|e| AppError::Field {
            field: "fog",
            message: e.to_string(),
        })?;
        let architectures = fog
            .architectures
            .map(|a| a.into_iter().map(Architecture::from).collect())
            .unwrap_or_else(|| vec![Architecture::Legacy, Architecture::Fog]);
        Ok((topology, architectures))
    }
}

fn parse_node(text: &str) -> Result<NodePattern, AppError> {
    let bad = || AppError::Field {
        field: "fog.links",
        message: format!("unknown node {text:?}"),
    };
    let (kind, id) = match text.split_once(':') {
        Some((k, id)) => (k, Some(id.parse::<u32>().map_err(|_| bad())?)),
        None => (text, None),
    };
    Ok(match (kind, id) {
        ("ue", None) => NodePattern::Ue,
        ("amf", None) => NodePattern::Amf,
        ("lmf", None) => NodePattern::Lmf,
        ("bs", None) => NodePattern::AnyBs,
        ("bs", Some(i)) => NodePattern::Bs(i),
        ("fog", None) => NodePattern::AnyFog,
        ("fog", Some(i)) => NodePattern::Fog(i),
        _ => return Err(bad()),
    })
}

fn parse_link(l: &LinkFile) -> Result<LinkSpec, AppError> {
    Ok(LinkSpec::new(
        parse_node(&l.a)?,
        parse_node(&l.b)?,
        LatencyModel {
            fixed_ms: l.fixed_ms,
            jitter_ms: l.jitter_ms,
        },
    ))
}

/// Document form of a config, angles back in degrees. Used for the metadata
/// echo written next to results.
pub fn to_file(config: &ScenarioConfig) -> ScenarioFile {
    let n = &config.noise;
    ScenarioFile {
        isd_m: Some(config.isd_m),
        bs_lateral_offset_m: Some(config.bs_lateral_offset_m),
        track_length_m: Some(config.track_length_m),
        speed_mps: Some(config.speed_mps),
        epoch_dt_s: Some(config.epoch_dt_s),
        n_fused_bs: Some(config.n_fused_bs),
        mode: Some(config.mode.into()),
        seed: Some(config.seed),
        warmup_epochs: Some(config.warmup_epochs),
        epochs: config.epochs,
        noise: NoiseFile {
            sigma_range_m: Some(n.sigma_range_m),
            range_ref_m: Some(n.range_ref_m),
            range_dist_exponent: Some(n.range_dist_exponent),
            sigma_aoa_deg: Some(rad_to_deg(n.sigma_aoa_rad)),
            beam_grid: n.beam_grid.map(|g| BeamGridFile {
                n_beams_az: g.n_beams_az,
            }),
            sigma_accel_mps2: Some(n.sigma_accel_mps2),
            accel_bias_rw_mps2_per_sqrt_s: Some(n.accel_bias_rw_mps2_per_sqrt_s),
            sigma_speed_mps: Some(n.sigma_speed_mps),
            sigma_init_pos_m: Some(n.sigma_init_pos_m),
        },
        filter: FilterFile {
            jerk_psd: Some(config.filter.jerk_psd),
            sigma_init_vel_mps: Some(config.filter.sigma_init_vel_mps),
            sigma_init_accel_mps2: Some(config.filter.sigma_init_accel_mps2),
            obs_variance_floor: Some(config.filter.obs_variance_floor),
            gate_chi2: config.filter.gate_chi2,
        },
        radio: RadioFile {
            carrier_ghz: Some(config.radio.carrier_ghz),
            tx_power_dbm: Some(config.radio.tx_power_dbm),
            bs_antennas: Some(config.radio.bs_antennas),
            ue_antennas: Some(config.radio.ue_antennas),
        },
        ..ScenarioFile::default()
    }
}
