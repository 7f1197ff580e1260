//! Library-vs-oracle comparisons used by several test targets.

use fusion_track_core::ekf::{
    measurement_jacobian, update, EstimatorState, FilterConfig, RowKind, StateMatrix, StateVector,
};
use fusion_track_core::measurements::{CellularObservation, ImuReading, MeasurementBatch};
use fusion_track_core::runner::{run_traced, Stage};
use fusion_track_core::scenario::{build_scenario, nearest_bs, BsSite, FusionMode, ScenarioConfig};
use fusion_track_core::{rng_from_seed, SimRng, Vec2};
use rand::Rng;

use super as oracles;
use super::{Mat6, Row, Vec6};

pub fn sites() -> Vec<BsSite> {
    build_scenario(&ScenarioConfig::default()).unwrap().sites
}

pub fn random_mean(rng: &mut SimRng) -> Vec6 {
    [
        rng.random_range(0.0..10_000.0),
        rng.random_range(-8.0..8.0),
        rng.random_range(0.5..60.0) * if rng.random_bool(0.1) { -1.0 } else { 1.0 },
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    ]
}

/// Random SPD matrix `A Aᵀ + d I`.
pub fn random_covariance(rng: &mut SimRng) -> Mat6 {
    let a: Mat6 = core::array::from_fn(|_| core::array::from_fn(|_| rng.random_range(-2.0..2.0)));
    let d = rng.random_range(0.01..1.0);
    core::array::from_fn(|i| {
        core::array::from_fn(|j| {
            (0..6).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { d } else { 0.0 }
        })
    })
}

pub fn to_state(mean: &Vec6, p: &Mat6) -> EstimatorState {
    EstimatorState {
        epoch: 0,
        mean: StateVector::from_column_slice(mean),
        covariance: StateMatrix::from_fn(|i, j| p[i][j]),
    }
}

pub fn xy(site: &BsSite) -> (f64, f64) {
    (site.position.x, site.position.y)
}

/// Largest relative gap between the library's stacked update and the
/// explicit-gain oracle over `trials` random fused corrections.
pub fn explicit_gain_error(seed: u64, trials: usize) -> f64 {
    let mut worst: f64 = 0.0;

    let all = sites();
    let mut rng = rng_from_seed(seed);
    for _ in 0..trials {
        let mean = random_mean(&mut rng);
        let p = random_covariance(&mut rng);
        let active = nearest_bs(&Vec2::new(mean[0], mean[1]), &all, 3).unwrap();
        let truth: Vec6 = core::array::from_fn(|i| mean[i] + rng.random_range(-0.5..0.5));
        let (ss, sa, sr, sq) = (
            rng.random_range(0.05..0.5),
            rng.random_range(0.01..0.2),
            rng.random_range(0.1..2.0),
            rng.random_range(0.005..0.1),
        );
        let mut cellular: Vec<CellularObservation> = active
            .iter()
            .map(|s| CellularObservation {
                bs_id: s.id,
                range_m: oracles::range(&truth, xy(s)),
                azimuth_rad: oracles::azimuth(&truth, xy(s)),
                sigma_range_m: sr,
                sigma_aoa_rad: sq,
            })
            .collect();
        cellular.sort_by_key(|o| o.bs_id);
        let batch = MeasurementBatch {
            epoch: 0,
            imu: Some(ImuReading {
                speed_meas: oracles::speed(&truth),
                accel_meas: Vec2::new(truth[4], truth[5]),
                sigma_speed_mps: ss,
                sigma_accel_mps2: sa,
            }),
            cellular: cellular.clone(),
        };
        let state = to_state(&mean, &p);
        let (post, _) = update(
            &state,
            &batch,
            &all,
            FusionMode::Fused,
            &FilterConfig::default(),
        )
        .unwrap();

        let s = oracles::speed(&mean);
        let mut rows = vec![
            Row {
                h: [0.0, 0.0, mean[2] / s, mean[3] / s, 0.0, 0.0],
                y: oracles::speed(&truth) - s,
                r: ss * ss,
            },
            Row {
                h: [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                y: truth[4] - mean[4],
                r: sa * sa,
            },
            Row {
                h: [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                y: truth[5] - mean[5],
                r: sa * sa,
            },
        ];
        for o in &cellular {
            let site = all.iter().find(|s| s.id == o.bs_id).unwrap();
            let (dx, dy) = (mean[0] - site.position.x, mean[1] - site.position.y);
            let r = (dx * dx + dy * dy).sqrt();
            rows.push(Row {
                h: [dx / r, dy / r, 0.0, 0.0, 0.0, 0.0],
                y: o.range_m - r,
                r: sr * sr,
            });
            rows.push(Row {
                h: [-dy / (r * r), dx / (r * r), 0.0, 0.0, 0.0, 0.0],
                y: oracles::wrap(o.azimuth_rad - oracles::azimuth(&mean, xy(site))),
                r: sq * sq,
            });
        }
        let (m_ref, p_ref) = oracles::explicit_gain_update(&mean, &p, &rows);
        for i in 0..6 {
            worst = worst.max(oracles::rel_diff(post.mean[i], m_ref[i]));
            for j in 0..6 {
                worst = worst.max(oracles::rel_diff(post.covariance[(i, j)], p_ref[i][j]));
            }
        }
    }
    worst
}

/// Largest analytic-vs-numeric gap over every row, relative to the row's
/// largest entry.
pub fn max_jacobian_error(mean: &Vec6, active: &[BsSite]) -> f64 {
    let lin = measurement_jacobian(
        &StateVector::from_column_slice(mean),
        active,
        FusionMode::Fused,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for (i, kind) in lin.kinds.iter().enumerate() {
        let (numeric, value) = match *kind {
            RowKind::Speed => (
                oracles::finite_difference(oracles::speed, mean, 1e-6, false),
                oracles::speed(mean),
            ),
            RowKind::AccelX => (
                oracles::finite_difference(|s| s[4], mean, 1e-6, false),
                mean[4],
            ),
            RowKind::AccelY => (
                oracles::finite_difference(|s| s[5], mean, 1e-6, false),
                mean[5],
            ),
            RowKind::Range { bs_id } => {
                let bs = xy(active.iter().find(|s| s.id == bs_id).unwrap());
                (
                    oracles::finite_difference(|s| oracles::range(s, bs), mean, 1e-6, false),
                    oracles::range(mean, bs),
                )
            }
            RowKind::Azimuth { bs_id } => {
                let bs = xy(active.iter().find(|s| s.id == bs_id).unwrap());
                (
                    oracles::finite_difference(|s| oracles::azimuth(s, bs), mean, 1e-6, true),
                    oracles::azimuth(mean, bs),
                )
            }
            RowKind::Pseudo { .. } => unreachable!(),
        };
        assert!(
            oracles::rel_diff(lin.predicted[i], value) < 1e-12,
            "{kind:?} predicted value"
        );
        let scale = (0..6)
            .map(|j| lin.jacobian[(i, j)].abs())
            .fold(0.0, f64::max);
        let gap = (0..6)
            .map(|j| (lin.jacobian[(i, j)] - numeric[j]).abs())
            .fold(0.0, f64::max);
        worst = worst.max(gap / scale);
    }
    worst
}

/// Worst relative Jacobian error over `states` random states.
pub fn jacobian_error(seed: u64, states: usize) -> f64 {
    let all = sites();
    let mut rng = rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..states {
        let mean = random_mean(&mut rng);
        let active = nearest_bs(&Vec2::new(mean[0], mean[1]), &all, 3).unwrap();
        worst = worst.max(max_jacobian_error(&mean, &active));
    }
    worst
}

/// Number of filter stages visited and epochs whose covariance failed the
/// symmetric-PSD check.
pub fn covariance_violations(cfg: &ScenarioConfig) -> (usize, Vec<u64>) {
    let mut steps = 0usize;
    let mut bad = Vec::new();
    run_traced(cfg, |stage| {
        let s = match stage {
            Stage::Initialized(s) | Stage::Predicted(s) | Stage::Updated(s, _) => s,
        };
        steps += 1;
        if !s.covariance_is_valid() {
            bad.push(s.epoch);
        }
    })
    .unwrap();
    (steps, bad)
}
