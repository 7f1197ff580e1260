//! Noisy observation generation.
//!
//! Error models:
//!
//! * range: `true + N(0, σ_r(d)²)`, `σ_r(d) = sigma_range_m · (d / range_ref_m)^γ`
//! * azimuth: `true + N(0, sigma_aoa_rad²)`, optionally snapped to the nearest
//!   beam of a DFT grid uniformly spaced in sine space about the array boresight
//! * acceleration: `true + bias(k) + N(0, sigma_accel²)` with the bias a random
//!   walk, `bias(k+1) = bias(k) + N(0, rw² · Δt)`
//! * speed: `|v| + N(0, sigma_speed²)`

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::angle::{deg_to_rad, wrap_pi};
use crate::error::{ConfigError, NumericError, Result};
use crate::scenario::{nearest_bs, BsSite, FusionMode, ScenarioConfig, TruthSample};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamGrid {
    pub n_beams_az: u32,
}

impl Default for BeamGrid {
    /// 16 azimuth beams, one per column of a 16×16 (256-element) array.
    fn default() -> Self {
        Self { n_beams_az: 16 }
    }
}

impl BeamGrid {
    /// Spacing between adjacent beams in sine space.
    pub fn sine_spacing(&self) -> f64 {
        2.0 / self.n_beams_az as f64
    }

    /// Snaps `azimuth` to the nearest beam direction. `boresight` is the
    /// array normal; beam `k` points at `u_k = -1 + (2k + 1) / n` in
    /// `u = sin(azimuth - boresight)`. Angles behind the array keep their
    /// back-lobe side.
    pub fn quantize(&self, azimuth: f64, boresight: f64) -> f64 {
        let n = self.n_beams_az as f64;
        let rel = wrap_pi(azimuth - boresight);
        let u = libm::sin(rel);
        let k = libm::floor((u + 1.0) * n / 2.0).clamp(0.0, n - 1.0);
        let u_beam = -1.0 + (2.0 * k + 1.0) / n;
        let front = libm::asin(u_beam);
        let snapped = if libm::fabs(rel) <= FRAC_PI_2 {
            front
        } else if rel > 0.0 {
            PI - front
        } else {
            -PI - front
        };
        wrap_pi(boresight + snapped)
    }
}

/// Boresight of a site's array: perpendicular to the road, facing it.
pub fn boresight_toward_road(site: &BsSite) -> f64 {
    if site.position.y > 0.0 {
        -FRAC_PI_2
    } else {
        FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Range noise std at `range_ref_m`.
    pub sigma_range_m: f64,
    pub range_ref_m: f64,
    pub range_dist_exponent: f64,
    pub sigma_aoa_rad: f64,
    pub beam_grid: Option<BeamGrid>,
    pub sigma_accel_mps2: f64,
    pub accel_bias_rw_mps2_per_sqrt_s: f64,
    pub sigma_speed_mps: f64,
    /// Std of the initial (GNSS-like) position fix, per axis.
    pub sigma_init_pos_m: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_range_m: 0.5,
            range_ref_m: 100.0,
            range_dist_exponent: 1.0,
            sigma_aoa_rad: deg_to_rad(4.0),
            beam_grid: None,
            sigma_accel_mps2: 0.05,
            accel_bias_rw_mps2_per_sqrt_s: 0.0005,
            sigma_speed_mps: 0.1,
            sigma_init_pos_m: 5.0,
        }
    }
}

impl NoiseConfig {
    /// Every noise source off.
    pub fn noiseless() -> Self {
        Self {
            sigma_range_m: 0.0,
            sigma_aoa_rad: 0.0,
            beam_grid: None,
            sigma_accel_mps2: 0.0,
            accel_bias_rw_mps2_per_sqrt_s: 0.0,
            sigma_speed_mps: 0.0,
            sigma_init_pos_m: 0.0,
            ..Self::default()
        }
    }

    pub fn range_sigma_at(&self, distance_m: f64) -> f64 {
        self.sigma_range_m * libm::pow(distance_m / self.range_ref_m, self.range_dist_exponent)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let stds = [
            ("noise.sigma_range_m", self.sigma_range_m),
            ("noise.sigma_aoa_rad", self.sigma_aoa_rad),
            ("noise.sigma_accel_mps2", self.sigma_accel_mps2),
            (
                "noise.accel_bias_rw_mps2_per_sqrt_s",
                self.accel_bias_rw_mps2_per_sqrt_s,
            ),
            ("noise.sigma_speed_mps", self.sigma_speed_mps),
            ("noise.sigma_init_pos_m", self.sigma_init_pos_m),
        ];
        for (field, v) in stds {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(field, ">= 0", v));
            }
        }
        if !(self.range_ref_m.is_finite() && self.range_ref_m > 0.0) {
            return Err(ConfigError::new(
                "noise.range_ref_m",
                "> 0",
                self.range_ref_m,
            ));
        }
        if !self.range_dist_exponent.is_finite() {
            return Err(ConfigError::new(
                "noise.range_dist_exponent",
                "finite",
                self.range_dist_exponent,
            ));
        }
        if let Some(grid) = self.beam_grid {
            if grid.n_beams_az == 0 {
                return Err(ConfigError::new("noise.beam_grid.n_beams_az", ">= 1", 0.0));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuReading {
    pub speed_meas: f64,
    pub accel_meas: Vec2,
    pub sigma_speed_mps: f64,
    pub sigma_accel_mps2: f64,
}

/// Range and azimuth observed from one base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellularObservation {
    pub bs_id: u32,
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub sigma_range_m: f64,
    pub sigma_aoa_rad: f64,
}

/// Everything observed at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    pub epoch: u64,
    pub imu: Option<ImuReading>,
    /// Sorted by `bs_id`.
    pub cellular: Vec<CellularObservation>,
}

/// Accelerometer bias random-walk accumulator, one per run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImuBias {
    pub bias: Vec2,
}

impl ImuBias {
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R, rw_intensity: f64, dt_s: f64) {
        let step = rw_intensity * libm::sqrt(dt_s);
        self.bias.x += step * gaussian(rng);
        self.bias.y += step * gaussian(rng);
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn true_range(vehicle: &Vec2, bs: &Vec2) -> f64 {
    (vehicle - bs).norm()
}

/// Direction of the vehicle as seen from the base station, `atan2` of
/// `vehicle - bs`, in `(-π, π]`.
pub fn true_azimuth(vehicle: &Vec2, bs: &Vec2) -> Result<f64, NumericError> {
    let d = vehicle - bs;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(NumericError::CoincidentPoints);
    }
    Ok(wrap_pi(libm::atan2(d.y, d.x)))
}

/// Draws the observations of one epoch. The IMU block is present when the
/// mode uses the IMU; the cellular list covers the `n_fused_bs` sites nearest
/// to the true position when the mode uses 5G. Draw order is fixed (IMU,
/// then sites by id, then the bias step) so a seed fully determines a run.
pub fn sample_batch<R: Rng + ?Sized>(
    truth: &TruthSample,
    sites: &[BsSite],
    config: &ScenarioConfig,
    rng: &mut R,
    imu_state: &mut ImuBias,
) -> crate::Result<MeasurementBatch> {
    sample_batch_for_mode(truth, sites, config, config.mode, rng, imu_state)
}

pub fn sample_batch_for_mode<R: Rng + ?Sized>(
    truth: &TruthSample,
    sites: &[BsSite],
    config: &ScenarioConfig,
    mode: FusionMode,
    rng: &mut R,
    imu_state: &mut ImuBias,
) -> crate::Result<MeasurementBatch> {
    let noise = &config.noise;
    let imu = if mode.uses_imu() {
        let accel_meas = Vec2::new(
            truth.acceleration.x + imu_state.bias.x + noise.sigma_accel_mps2 * gaussian(rng),
            truth.acceleration.y + imu_state.bias.y + noise.sigma_accel_mps2 * gaussian(rng),
        );
        let speed_meas = truth.velocity.norm() + noise.sigma_speed_mps * gaussian(rng);
        Some(ImuReading {
            speed_meas,
            accel_meas,
            sigma_speed_mps: noise.sigma_speed_mps,
            sigma_accel_mps2: noise.sigma_accel_mps2,
        })
    } else {
        None
    };

    let mut cellular = Vec::new();
    if mode.uses_cellular() {
        let mut active = nearest_bs(&truth.position, sites, config.n_fused_bs)?;
        active.sort_by_key(|s| s.id);
        cellular.reserve(active.len());
        for site in active {
            let distance = true_range(&truth.position, &site.position);
            let azimuth = true_azimuth(&truth.position, &site.position)
                .map_err(|_| NumericError::DegenerateGeometry { bs_id: site.id })?;
            let sigma_r = noise.range_sigma_at(distance);
            let range_m = libm::fabs(distance + sigma_r * gaussian(rng)).max(f64::MIN_POSITIVE);
            let mut azimuth_rad = wrap_pi(azimuth + noise.sigma_aoa_rad * gaussian(rng));
            if let Some(grid) = noise.beam_grid {
                azimuth_rad = grid.quantize(azimuth_rad, boresight_toward_road(&site));
            }
            cellular.push(CellularObservation {
                bs_id: site.id,
                range_m,
                azimuth_rad,
                sigma_range_m: sigma_r,
                sigma_aoa_rad: effective_aoa_sigma(noise),
            });
        }
    }

    if mode.uses_imu() {
        imu_state.advance(rng, noise.accel_bias_rw_mps2_per_sqrt_s, config.epoch_dt_s);
    }

    Ok(MeasurementBatch {
        epoch: truth.epoch,
        imu,
        cellular,
    })
}

/// Azimuth std reported to the filter. With a beam grid the quantization
/// error (uniform over one beam, at broadside) is added in quadrature.
pub fn effective_aoa_sigma(noise: &NoiseConfig) -> f64 {
    match noise.beam_grid {
        None => noise.sigma_aoa_rad,
        Some(grid) => {
            let spacing = libm::asin(grid.sine_spacing().min(1.0));
            libm::sqrt(noise.sigma_aoa_rad * noise.sigma_aoa_rad + spacing * spacing / 12.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use crate::scenario::{build_scenario, ScenarioConfig};
    use core::f64::consts::FRAC_PI_4;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn range_examples() {
        assert_eq!(
            true_range(&Vec2::new(100.0, 0.0), &Vec2::new(100.0, 30.0)),
            30.0
        );
        assert_eq!(
            true_range(&Vec2::new(0.0, 0.0), &Vec2::new(40.0, 30.0)),
            50.0
        );
        assert_eq!(true_range(&Vec2::zeros(), &Vec2::zeros()), 0.0);
    }

    #[test]
    fn azimuth_examples() {
        let bs = Vec2::new(0.0, 30.0);
        assert!(approx(
            true_azimuth(&Vec2::new(0.0, 0.0), &bs).unwrap(),
            -FRAC_PI_2,
            1e-15
        ));
        assert!(approx(
            true_azimuth(&Vec2::new(30.0, 0.0), &bs).unwrap(),
            -FRAC_PI_4,
            1e-15
        ));
        // atan2(-30, -30)
        assert!(approx(
            true_azimuth(&Vec2::new(-30.0, 0.0), &bs).unwrap(),
            -3.0 * FRAC_PI_4,
            1e-15
        ));
        assert_eq!(true_azimuth(&bs, &bs), Err(NumericError::CoincidentPoints));
    }

    fn one_site_config(noise: NoiseConfig) -> (ScenarioConfig, Vec<BsSite>) {
        let cfg = ScenarioConfig {
            noise,
            n_fused_bs: 1,
            ..ScenarioConfig::default()
        };
        let site = BsSite {
            id: 0,
            position: Vec2::new(100.0, 30.0),
        };
        (cfg, alloc::vec![site])
    }

    fn truth_at(x: f64) -> TruthSample {
        TruthSample {
            epoch: 3,
            t_s: 0.3,
            position: Vec2::new(x, 0.0),
            velocity: Vec2::new(36.111, 0.0),
            acceleration: Vec2::zeros(),
        }
    }

    #[test]
    fn zero_noise_batch_is_exact() {
        let (cfg, sites) = one_site_config(NoiseConfig::noiseless());
        let mut rng = rng_from_seed(1);
        let mut bias = ImuBias::default();
        let b = sample_batch(&truth_at(100.0), &sites, &cfg, &mut rng, &mut bias).unwrap();
        assert_eq!(b.epoch, 3);
        let imu = b.imu.unwrap();
        assert_eq!(imu.accel_meas, Vec2::zeros());
        assert_eq!(imu.speed_meas, 36.111);
        assert_eq!(b.cellular.len(), 1);
        assert_eq!(b.cellular[0].range_m, 30.0);
        assert!(approx(b.cellular[0].azimuth_rad, -FRAC_PI_2, 1e-15));
    }

    #[test]
    fn same_seed_same_batch() {
        let cfg = ScenarioConfig::default();
        let sc = build_scenario(&cfg).unwrap();
        let draw = || {
            let mut rng = rng_from_seed(77);
            let mut bias = ImuBias::default();
            (0..20)
                .map(|k| {
                    sample_batch(
                        &sc.trajectory.sample(k),
                        &sc.sites,
                        &cfg,
                        &mut rng,
                        &mut bias,
                    )
                    .unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn batch_shape_follows_mode() {
        let mut cfg = ScenarioConfig::default();
        let sc = build_scenario(&cfg).unwrap();
        let truth = sc.trajectory.sample(40);
        for mode in FusionMode::ALL {
            cfg.mode = mode;
            let b = sample_batch(
                &truth,
                &sc.sites,
                &cfg,
                &mut rng_from_seed(0),
                &mut ImuBias::default(),
            )
            .unwrap();
            assert_eq!(b.imu.is_some(), mode.uses_imu());
            assert_eq!(b.cellular.len(), if mode.uses_cellular() { 3 } else { 0 });
            assert!(b.cellular.windows(2).all(|w| w[0].bs_id < w[1].bs_id));
            assert!(b
                .cellular
                .iter()
                .all(|c| c.range_m > 0.0 && c.azimuth_rad > -PI && c.azimuth_rad <= PI));
        }
    }

    #[test]
    fn range_sigma_scales_with_distance() {
        let noise = NoiseConfig {
            sigma_range_m: 0.5,
            range_ref_m: 100.0,
            range_dist_exponent: 1.0,
            ..NoiseConfig::default()
        };
        assert!(approx(noise.range_sigma_at(200.0), 1.0, 1e-15));
        assert!(approx(noise.range_sigma_at(50.0), 0.25, 1e-15));
    }

    #[test]
    fn range_noise_std_matches_model() {
        // BS at 200 m; 10^5 draws, empirical std within 2% of σ_r = 1.0
        let noise = NoiseConfig {
            sigma_range_m: 0.5,
            range_ref_m: 100.0,
            range_dist_exponent: 1.0,
            sigma_aoa_rad: 0.0,
            ..NoiseConfig::noiseless()
        };
        let cfg = ScenarioConfig {
            noise,
            n_fused_bs: 1,
            mode: FusionMode::FiveGOnly,
            ..ScenarioConfig::default()
        };
        let sites = alloc::vec![BsSite {
            id: 0,
            position: Vec2::new(0.0, 200.0),
        }];
        let truth = truth_at(0.0);
        let mut rng = rng_from_seed(2024);
        let mut bias = ImuBias::default();
        let n = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let b = sample_batch(&truth, &sites, &cfg, &mut rng, &mut bias).unwrap();
            assert_eq!(b.cellular[0].sigma_range_m, 1.0);
            let e = b.cellular[0].range_m - 200.0;
            sum += e;
            sum_sq += e * e;
        }
        let mean = sum / n as f64;
        let std = libm::sqrt(sum_sq / n as f64 - mean * mean);
        assert!((std - 1.0).abs() < 0.02, "std {std}");
    }

    #[test]
    fn beam_quantization_error_is_bounded() {
        let grid = BeamGrid::default();
        let bore = -FRAC_PI_2;
        let half = grid.sine_spacing() / 2.0;
        let mut az = -PI + 0.01;
        while az < 0.0 {
            let q = grid.quantize(az, bore);
            let du = (libm::sin(q - bore) - libm::sin(az - bore)).abs();
            assert!(du <= half + 1e-12, "az {az} q {q} du {du}");
            az += 0.003;
        }
        // a direction exactly on a beam is left alone
        let on_beam = bore + libm::asin(-1.0 + 3.0 / 16.0);
        assert!(approx(grid.quantize(on_beam, bore), on_beam, 1e-12));
    }

    #[test]
    fn beam_grid_batch_bounded_without_gaussian_noise() {
        let noise = NoiseConfig {
            beam_grid: Some(BeamGrid::default()),
            ..NoiseConfig::noiseless()
        };
        let mut cfg = ScenarioConfig {
            noise,
            mode: FusionMode::FiveGOnly,
            ..ScenarioConfig::default()
        };
        cfg.n_fused_bs = 3;
        let sc = build_scenario(&cfg).unwrap();
        let half = BeamGrid::default().sine_spacing() / 2.0;
        let mut rng = rng_from_seed(5);
        let mut bias = ImuBias::default();
        for k in (0..2769).step_by(13) {
            let truth = sc.trajectory.sample(k);
            let b = sample_batch(&truth, &sc.sites, &cfg, &mut rng, &mut bias).unwrap();
            for obs in &b.cellular {
                let site = sc.sites[obs.bs_id as usize];
                let exact = true_azimuth(&truth.position, &site.position).unwrap();
                let bore = boresight_toward_road(&site);
                let du = (libm::sin(obs.azimuth_rad - bore) - libm::sin(exact - bore)).abs();
                assert!(du <= half + 1e-12);
            }
        }
    }

    #[test]
    fn bias_variance_grows_linearly() {
        // ensemble of 10^4 walks: var(bias_k) = rw² · Δt · k
        let rw = 0.01;
        let dt = 0.1;
        let runs = 10_000;
        let checkpoints = [10usize, 50, 200];
        let mut sums = [0.0f64; 3];
        let mut rng = rng_from_seed(99);
        for _ in 0..runs {
            let mut b = ImuBias::default();
            let mut ci = 0;
            for k in 1..=200 {
                b.advance(&mut rng, rw, dt);
                if k == checkpoints[ci] {
                    sums[ci] += b.bias.x * b.bias.x;
                    ci = (ci + 1).min(2);
                }
            }
        }
        for (i, k) in checkpoints.iter().enumerate() {
            let var = sums[i] / runs as f64;
            let expect = rw * rw * dt * *k as f64;
            assert!(
                (var / expect - 1.0).abs() < 0.05,
                "k={k} var={var} expect={expect}"
            );
        }
    }

    #[test]
    fn validate_rejects_negative_std() {
        let bad = NoiseConfig {
            sigma_aoa_rad: -0.1,
            ..NoiseConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().field, "noise.sigma_aoa_rad");
        let bad = NoiseConfig {
            range_ref_m: 0.0,
            ..NoiseConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().field, "noise.range_ref_m");
    }
}
