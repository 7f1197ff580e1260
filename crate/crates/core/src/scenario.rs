//! Highway geometry, base-station deployment, ground-truth trajectory and the
//! V2X positioning requirement profiles.
//!
//! Road frame: the road runs along the x axis at y = 0, the vehicle starts at
//! the origin (abreast of BS 0) heading +x, and base stations sit on the line
//! y = `bs_lateral_offset_m` (negative offsets put them on the other side).

use alloc::vec::Vec;

use crate::ekf::FilterConfig;
use crate::error::{ConfigError, Error, Result};
use crate::measurements::NoiseConfig;
use crate::Vec2;

/// Which observations feed the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FusionMode {
    /// Speed and acceleration from the IMU only (dead reckoning).
    ImuOnly,
    /// Range and azimuth from the `n_fused_bs` nearest base stations only.
    FiveGOnly,
    /// Both of the above.
    Fused,
}

impl FusionMode {
    pub const ALL: [FusionMode; 3] = [
        FusionMode::ImuOnly,
        FusionMode::FiveGOnly,
        FusionMode::Fused,
    ];

    pub fn uses_imu(self) -> bool {
        matches!(self, FusionMode::ImuOnly | FusionMode::Fused)
    }

    pub fn uses_cellular(self) -> bool {
        matches!(self, FusionMode::FiveGOnly | FusionMode::Fused)
    }

    /// Stable lowercase name used in files.
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::ImuOnly => "imu_only",
            FusionMode::FiveGOnly => "five_g_only",
            FusionMode::Fused => "fused",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "imu_only" => Some(FusionMode::ImuOnly),
            "five_g_only" => Some(FusionMode::FiveGOnly),
            "fused" => Some(FusionMode::Fused),
            _ => None,
        }
    }
}

impl core::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Radio parameters of the reference setup. Recorded for reporting only; the
/// noise magnitudes in [`NoiseConfig`] stand in for the link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioMetadata {
    pub carrier_ghz: f64,
    pub tx_power_dbm: f64,
    pub bs_antennas: u32,
    pub ue_antennas: u32,
}

impl Default for RadioMetadata {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            tx_power_dbm: 40.0,
            bs_antennas: 256,
            ue_antennas: 4,
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Spacing of base stations along the road.
    pub isd_m: f64,
    pub bs_lateral_offset_m: f64,
    pub track_length_m: f64,
    pub speed_mps: f64,
    pub epoch_dt_s: f64,
    /// Number of nearest base stations whose observations are fused.
    pub n_fused_bs: usize,
    pub noise: NoiseConfig,
    pub filter: FilterConfig,
    pub seed: u64,
    pub mode: FusionMode,
    /// Leading epochs left out of error reports (initial-fix transient).
    pub warmup_epochs: usize,
    /// Replaces the distance-derived epoch count when set. Required when
    /// `speed_mps` is zero.
    pub epochs: Option<usize>,
    pub radio: RadioMetadata,
}

pub const DEFAULT_SPEED_MPS: f64 = 130.0 / 3.6;

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            isd_m: 200.0,
            bs_lateral_offset_m: 30.0,
            track_length_m: 10_000.0,
            speed_mps: DEFAULT_SPEED_MPS,
            epoch_dt_s: 0.1,
            n_fused_bs: 3,
            noise: NoiseConfig::default(),
            filter: FilterConfig::default(),
            seed: 0,
            mode: FusionMode::Fused,
            warmup_epochs: 10,
            epochs: None,
            radio: RadioMetadata::default(),
        }
    }
}

fn require(
    ok: bool,
    field: &'static str,
    constraint: &'static str,
    value: f64,
) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, constraint, value))
    }
}

impl ScenarioConfig {
    /// Number of base stations the deployment places along the track.
    pub fn bs_count(&self) -> usize {
        libm::floor(self.track_length_m / self.isd_m) as usize + 1
    }

    /// `floor(track_length / (speed * dt))` unless overridden by `epochs`.
    pub fn epoch_count(&self) -> usize {
        match self.epochs {
            Some(n) => n,
            None => libm::floor(self.track_length_m / (self.speed_mps * self.epoch_dt_s)) as usize,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        require(finite_pos(self.isd_m), "isd_m", "> 0", self.isd_m)?;
        require(
            self.bs_lateral_offset_m.is_finite() && self.bs_lateral_offset_m != 0.0,
            "bs_lateral_offset_m",
            "finite and non-zero",
            self.bs_lateral_offset_m,
        )?;
        require(
            finite_pos(self.track_length_m),
            "track_length_m",
            "> 0",
            self.track_length_m,
        )?;
        require(
            self.speed_mps.is_finite() && self.speed_mps >= 0.0,
            "speed_mps",
            ">= 0",
            self.speed_mps,
        )?;
        require(
            finite_pos(self.epoch_dt_s),
            "epoch_dt_s",
            "> 0",
            self.epoch_dt_s,
        )?;
        if self.epochs.is_none() {
            require(
                self.speed_mps > 0.0,
                "speed_mps",
                "> 0 unless `epochs` is given",
                self.speed_mps,
            )?;
        }
        require(
            self.n_fused_bs >= 1,
            "n_fused_bs",
            ">= 1",
            self.n_fused_bs as f64,
        )?;
        require(
            self.n_fused_bs <= self.bs_count(),
            "n_fused_bs",
            "<= number of deployed base stations",
            self.n_fused_bs as f64,
        )?;
        self.noise.validate()?;
        self.filter.validate()?;
        Ok(())
    }
}

/// A deployed base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsSite {
    pub id: u32,
    pub position: Vec2,
}

/// Ground-truth kinematic state at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub epoch: u64,
    pub t_s: f64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

/// Straight constant-speed drive along +x starting at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    speed_mps: f64,
    epoch_dt_s: f64,
    epochs: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.epochs
    }

    pub fn is_empty(&self) -> bool {
        self.epochs == 0
    }

    pub fn sample(&self, epoch: u64) -> TruthSample {
        let t_s = epoch as f64 * self.epoch_dt_s;
        TruthSample {
            epoch,
            t_s,
            position: Vec2::new(self.speed_mps * t_s, 0.0),
            velocity: Vec2::new(self.speed_mps, 0.0),
            acceleration: Vec2::zeros(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = TruthSample> + '_ {
        (0..self.epochs as u64).map(move |k| self.sample(k))
    }
}

/// A validated scenario: deployed sites plus the truth generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sites: Vec<BsSite>,
    pub trajectory: Trajectory,
}

pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate().map_err(Error::from)?;
    let sites = (0..config.bs_count())
        .map(|k| BsSite {
            id: k as u32,
            position: Vec2::new(k as f64 * config.isd_m, config.bs_lateral_offset_m),
        })
        .collect();
    Ok(Scenario {
        sites,
        trajectory: Trajectory {
            speed_mps: config.speed_mps,
            epoch_dt_s: config.epoch_dt_s,
            epochs: config.epoch_count(),
        },
    })
}

/// The `n` sites closest to `position`, ordered by distance then id.
pub fn nearest_bs(position: &Vec2, sites: &[BsSite], n: usize) -> Result<Vec<BsSite>> {
    if n > sites.len() {
        return Err(Error::Argument(
            "more base stations requested than deployed",
        ));
    }
    let mut ranked: Vec<(f64, BsSite)> = sites
        .iter()
        .map(|s| ((s.position - position).norm_squared(), *s))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    Ok(ranked.into_iter().take(n).map(|(_, s)| s).collect())
}

/// Confidence level attached to an accuracy requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaLevel {
    One,
    Three,
}

impl SigmaLevel {
    /// Percentile of the error distribution the requirement applies to.
    pub fn percentile(self) -> f64 {
        match self {
            SigmaLevel::One => 68.3,
            SigmaLevel::Three => 99.7,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SigmaLevel::One => "1σ",
            SigmaLevel::Three => "3σ",
        }
    }
}

/// A V2X use case with its horizontal accuracy requirement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequirementProfile {
    pub name: &'static str,
    /// Strictest accuracy bound, meters.
    pub accuracy_m: f64,
    /// Upper end when the requirement is given as a range (e.g. 0.1-0.5 m).
    pub accuracy_upper_m: Option<f64>,
    /// `None` where the source gives no confidence level.
    pub sigma_level: Option<SigmaLevel>,
    /// Highest velocity listed for the use case.
    pub velocity_kmh: f64,
    pub velocity_text: &'static str,
    /// Vehicle density when a single figure is listed.
    pub density_per_km2: Option<u32>,
    pub density_text: &'static str,
}

impl RequirementProfile {
    /// Level used for compliance; unspecified levels are checked at 3σ.
    pub fn effective_sigma(&self) -> SigmaLevel {
        self.sigma_level.unwrap_or(SigmaLevel::Three)
    }
}

#[allow(clippy::too_many_arguments)]
const fn profile(
    name: &'static str,
    accuracy_m: f64,
    accuracy_upper_m: Option<f64>,
    sigma_level: Option<SigmaLevel>,
    velocity_kmh: f64,
    velocity_text: &'static str,
    density_per_km2: Option<u32>,
    density_text: &'static str,
) -> RequirementProfile {
    RequirementProfile {
        name,
        accuracy_m,
        accuracy_upper_m,
        sigma_level,
        velocity_kmh,
        velocity_text,
        density_per_km2,
        density_text,
    }
}

use SigmaLevel::{One, Three};

static PROFILES: [RequirementProfile; 12] = [
    profile(
        "Intersection movement assist",
        1.5,
        None,
        Some(Three),
        120.0,
        "120",
        Some(12000),
        "12000",
    ),
    profile(
        "Traffic jam warning (urban environment)",
        20.0,
        None,
        Some(One),
        70.0,
        "70",
        Some(12000),
        "12000",
    ),
    profile(
        "Lane change warning",
        1.5,
        None,
        Some(Three),
        50.0,
        "Host vehicle: 40; Remote vehicle: 50",
        Some(12000),
        "12000",
    ),
    profile(
        "High-definition sensor sharing",
        0.1,
        None,
        Some(Three),
        250.0,
        "250",
        Some(12000),
        "12000",
    ),
    profile(
        "Vulnerable road user (VRU) awareness - potentially dangerous situation",
        1.0,
        None,
        Some(Three),
        120.0,
        "Urban: 70; Rural: 120",
        None,
        "VRU: 300; Vehicles: 1500",
    ),
    profile(
        "Real-time situational awareness and high-definition maps",
        0.5,
        None,
        Some(Three),
        250.0,
        "250",
        Some(1500),
        "1500",
    ),
    profile(
        "Group start",
        0.2,
        None,
        Some(Three),
        70.0,
        "70",
        Some(3200),
        "3200",
    ),
    profile(
        "Tele-operated driving support",
        0.1,
        None,
        Some(Three),
        10.0,
        "10",
        Some(10),
        "10",
    ),
    profile(
        "High-definition map collecting and sharing",
        0.1,
        Some(0.5),
        Some(Three),
        250.0,
        "City: 70; Highway: 250",
        Some(12000),
        "12000",
    ),
    profile(
        "Automated intersection crossing",
        0.15,
        None,
        Some(Three),
        120.0,
        "Urban: 70; Rural: 120",
        None,
        "3200 vehicles; 10000 VRUs",
    ),
    profile(
        "Infrastructure assisted environment perception",
        0.15,
        None,
        Some(Three),
        250.0,
        "250",
        Some(1200),
        "1200",
    ),
    profile(
        "Driverless train",
        0.25,
        None,
        None,
        150.0,
        "150",
        None,
        "N/A",
    ),
];

/// Use cases that carry a numeric accuracy requirement. Rows whose accuracy is
/// "not applicable" are omitted.
pub fn builtin_requirement_profiles() -> &'static [RequirementProfile] {
    &PROFILES
}

pub fn find_profile(name: &str) -> Option<&'static RequirementProfile> {
    PROFILES.iter().find(|p| p.name == name)
}
