//! Constant-acceleration extended Kalman filter.
//!
//! State `[x, y, vx, vy, ax, ay]` in the road frame. The process model is
//! linear (white-jerk driven constant acceleration); all nonlinearity sits in
//! the observations: IMU speed `|v|` and acceleration, and per-BS range and
//! azimuth. Every available observation of an epoch is stacked into a single
//! correction, and the covariance is updated in Joseph form.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, RowSVector, SMatrix, SVector};
use rand::Rng;

use crate::angle::wrap_pi;
use crate::error::{ConfigError, Error, NumericError, ObservationBlock, Result};
use crate::measurements::{gaussian, MeasurementBatch};
use crate::scenario::{BsSite, FusionMode, ScenarioConfig, TruthSample};
use crate::Vec2;

pub const STATE_DIM: usize = 6;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type JacobianRow = RowSVector<f64, STATE_DIM>;

const X: usize = 0;
const Y: usize = 1;
const VX: usize = 2;
const VY: usize = 3;
const AX: usize = 4;
const AY: usize = 5;

/// Below this predicted speed the `|v|` row has no usable gradient.
const MIN_SPEED_FOR_JACOBIAN: f64 = 1e-9;

/// Filter tuning carried inside [`ScenarioConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Continuous white-jerk power spectral density, (m/s³)²·s.
    pub jerk_psd: f64,
    pub sigma_init_vel_mps: f64,
    pub sigma_init_accel_mps2: f64,
    /// Lower bound on any sensor observation variance fed to the filter.
    /// Keeps noiseless sensors from making the innovation covariance singular.
    pub obs_variance_floor: f64,
    /// Optional per-row chi-square gate on the normalized innovation
    /// (1 degree of freedom). `None` disables gating.
    pub gate_chi2: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            jerk_psd: 1.0,
            sigma_init_vel_mps: 1.0,
            sigma_init_accel_mps2: 0.5,
            obs_variance_floor: 1e-12,
            gate_chi2: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let nonneg = [
            ("filter.jerk_psd", self.jerk_psd),
            ("filter.sigma_init_vel_mps", self.sigma_init_vel_mps),
            ("filter.sigma_init_accel_mps2", self.sigma_init_accel_mps2),
            ("filter.obs_variance_floor", self.obs_variance_floor),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(field, ">= 0", v));
            }
        }
        if let Some(g) = self.gate_chi2 {
            if g.is_nan() || g <= 0.0 {
                return Err(ConfigError::new("filter.gate_chi2", "> 0", g));
            }
        }
        Ok(())
    }
}

/// Mean and covariance of the filter at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub epoch: u64,
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl EstimatorState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.mean[X], self.mean[Y])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.mean[VX], self.mean[VY])
    }

    pub fn acceleration(&self) -> Vec2 {
        Vec2::new(self.mean[AX], self.mean[AY])
    }

    pub fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(self.covariance.iter())
            .all(|v| v.is_finite())
    }

    /// Symmetric to 1e-9 relative and PSD up to roundoff
    /// (eigenvalues ≥ −1e-9·trace).
    pub fn covariance_is_valid(&self) -> bool {
        let p = &self.covariance;
        let scale = p.amax().max(f64::MIN_POSITIVE);
        let asym = (p - p.transpose()).amax();
        if asym > 1e-9 * scale {
            return false;
        }
        let sym = (p + p.transpose()) * 0.5;
        let min_eig = sym.symmetric_eigenvalues().min();
        min_eig >= -1e-9 * p.trace().abs().max(f64::MIN_POSITIVE)
    }
}

/// Discretized constant-acceleration dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessModel {
    pub dt_s: f64,
    pub jerk_psd: f64,
}

impl ProcessModel {
    pub fn new(dt_s: f64, jerk_psd: f64) -> Result<Self, ConfigError> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(ConfigError::new("epoch_dt_s", "> 0", dt_s));
        }
        if !(jerk_psd.is_finite() && jerk_psd >= 0.0) {
            return Err(ConfigError::new("filter.jerk_psd", ">= 0", jerk_psd));
        }
        Ok(Self { dt_s, jerk_psd })
    }

    pub fn transition(&self) -> StateMatrix {
        let dt = self.dt_s;
        let mut f = StateMatrix::identity();
        for axis in 0..2 {
            f[(X + axis, VX + axis)] = dt;
            f[(X + axis, AX + axis)] = 0.5 * dt * dt;
            f[(VX + axis, AX + axis)] = dt;
        }
        f
    }

    /// White-jerk process noise, per axis
    /// `q · [[dt⁵/20, dt⁴/8, dt³/6], [dt⁴/8, dt³/3, dt²/2], [dt³/6, dt²/2, dt]]`.
    pub fn noise(&self) -> StateMatrix {
        let dt = self.dt_s;
        let q = self.jerk_psd;
        let (dt2, dt3) = (dt * dt, dt * dt * dt);
        let (dt4, dt5) = (dt3 * dt, dt3 * dt2);
        let block = [
            [dt5 / 20.0, dt4 / 8.0, dt3 / 6.0],
            [dt4 / 8.0, dt3 / 3.0, dt2 / 2.0],
            [dt3 / 6.0, dt2 / 2.0, dt],
        ];
        let mut m = StateMatrix::zeros();
        for axis in 0..2 {
            let idx = [X + axis, VX + axis, AX + axis];
            for (r, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    m[(i, j)] = q * block[r][c];
                }
            }
        }
        m
    }
}

/// Initial estimate from a noisy GNSS-like position fix, nominal velocity
/// `(speed_mps, 0)` and zero acceleration.
pub fn initialize<R: Rng + ?Sized>(
    truth0: &TruthSample,
    config: &ScenarioConfig,
    rng: &mut R,
) -> EstimatorState {
    let sp = config.noise.sigma_init_pos_m;
    let sv = config.filter.sigma_init_vel_mps;
    let sa = config.filter.sigma_init_accel_mps2;
    let x = truth0.position.x + sp * gaussian(rng);
    let y = truth0.position.y + sp * gaussian(rng);
    let mean = StateVector::from([x, y, config.speed_mps, 0.0, 0.0, 0.0]);
    let covariance = StateMatrix::from_diagonal(&StateVector::from([
        sp * sp,
        sp * sp,
        sv * sv,
        sv * sv,
        sa * sa,
        sa * sa,
    ]));
    EstimatorState {
        epoch: truth0.epoch,
        mean,
        covariance,
    }
}

pub fn predict(state: &EstimatorState, model: &ProcessModel) -> Result<EstimatorState> {
    if !state.is_finite() {
        return Err(NumericError::NonFiniteState.into());
    }
    let f = model.transition();
    let mean = f * state.mean;
    let covariance = symmetrize(f * state.covariance * f.transpose() + model.noise());
    let next = EstimatorState {
        epoch: state.epoch + 1,
        mean,
        covariance,
    };
    if !next.is_finite() {
        return Err(NumericError::NonFiniteState.into());
    }
    Ok(next)
}

/// What a stacked observation row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Speed,
    AccelX,
    AccelY,
    Range {
        bs_id: u32,
    },
    Azimuth {
        bs_id: u32,
    },
    /// Arbitrary linear observation supplied through [`update_with_rows`].
    Pseudo {
        index: usize,
    },
}

impl RowKind {
    pub fn block(self) -> ObservationBlock {
        match self {
            RowKind::Speed => ObservationBlock::Speed,
            RowKind::AccelX | RowKind::AccelY => ObservationBlock::Acceleration,
            RowKind::Range { bs_id } => ObservationBlock::Range { bs_id },
            RowKind::Azimuth { bs_id } => ObservationBlock::Azimuth { bs_id },
            RowKind::Pseudo { index } => ObservationBlock::Pseudo { index },
        }
    }

    pub fn is_angular(self) -> bool {
        matches!(self, RowKind::Azimuth { .. })
    }
}

/// Observation function values and analytic Jacobian at one mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub kinds: Vec<RowKind>,
    pub predicted: DVector<f64>,
    /// `kinds.len() × 6`.
    pub jacobian: DMatrix<f64>,
    /// The speed row was requested but the predicted speed is zero.
    pub speed_row_dropped: bool,
}

/// Predicted observations and their partial derivatives for the rows a mode
/// uses: `|v|` and `(ax, ay)` for the IMU, then range and azimuth for each
/// site in the given order.
pub fn measurement_jacobian(
    mean: &StateVector,
    sites: &[BsSite],
    mode: FusionMode,
) -> Result<Linearization> {
    let mut kinds = Vec::new();
    let mut predicted = Vec::new();
    let mut rows: Vec<JacobianRow> = Vec::new();
    let mut speed_row_dropped = false;

    if mode.uses_imu() {
        let (vx, vy) = (mean[VX], mean[VY]);
        let speed = libm::hypot(vx, vy);
        if speed > MIN_SPEED_FOR_JACOBIAN {
            let mut row = JacobianRow::zeros();
            row[VX] = vx / speed;
            row[VY] = vy / speed;
            kinds.push(RowKind::Speed);
            predicted.push(speed);
            rows.push(row);
        } else {
            speed_row_dropped = true;
        }
        for (kind, idx) in [(RowKind::AccelX, AX), (RowKind::AccelY, AY)] {
            let mut row = JacobianRow::zeros();
            row[idx] = 1.0;
            kinds.push(kind);
            predicted.push(mean[idx]);
            rows.push(row);
        }
    }

    if mode.uses_cellular() {
        for site in sites {
            let dx = mean[X] - site.position.x;
            let dy = mean[Y] - site.position.y;
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                return Err(NumericError::DegenerateGeometry { bs_id: site.id }.into());
            }
            let r = libm::sqrt(r2);

            let mut range_row = JacobianRow::zeros();
            range_row[X] = dx / r;
            range_row[Y] = dy / r;
            kinds.push(RowKind::Range { bs_id: site.id });
            predicted.push(r);
            rows.push(range_row);

            let mut az_row = JacobianRow::zeros();
            az_row[X] = -dy / r2;
            az_row[Y] = dx / r2;
            kinds.push(RowKind::Azimuth { bs_id: site.id });
            predicted.push(libm::atan2(dy, dx));
            rows.push(az_row);
        }
    }

    let jacobian = if rows.is_empty() {
        DMatrix::zeros(0, STATE_DIM)
    } else {
        DMatrix::from_fn(rows.len(), STATE_DIM, |i, j| rows[i][j])
    };
    Ok(Linearization {
        kinds,
        predicted: DVector::from_vec(predicted),
        jacobian,
        speed_row_dropped,
    })
}

/// One scalar observation linearized about the prior mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRow {
    pub kind: RowKind,
    pub measured: f64,
    pub predicted: f64,
    pub jacobian: JacobianRow,
    pub variance: f64,
}

impl ObservationRow {
    /// A linear observation `h · state` with the given variance.
    pub fn linear(
        index: usize,
        jacobian: JacobianRow,
        measured: f64,
        variance: f64,
        mean: &StateVector,
    ) -> Self {
        Self {
            kind: RowKind::Pseudo { index },
            measured,
            predicted: (jacobian * mean)[0],
            jacobian,
            variance,
        }
    }

    fn innovation(&self) -> f64 {
        let d = self.measured - self.predicted;
        if self.kind.is_angular() {
            wrap_pi(d)
        } else {
            d
        }
    }
}

/// Innovation statistics of one correction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Rows that entered the correction, in stacking order.
    pub kinds: Vec<RowKind>,
    pub innovation: DVector<f64>,
    pub innovation_covariance: DMatrix<f64>,
    pub speed_row_dropped: bool,
    /// Rows rejected by the chi-square gate.
    pub gated: Vec<RowKind>,
    /// Rows ignored because their variance is infinite.
    pub uninformative: Vec<RowKind>,
}

/// Corrects `state` with the observations in `batch` that `mode` uses.
pub fn update(
    state: &EstimatorState,
    batch: &MeasurementBatch,
    sites: &[BsSite],
    mode: FusionMode,
    config: &FilterConfig,
) -> Result<(EstimatorState, Diagnostics)> {
    if batch.epoch != state.epoch {
        return Err(Error::EpochMismatch {
            state: state.epoch,
            batch: batch.epoch,
        });
    }

    let mut active = Vec::with_capacity(batch.cellular.len());
    if mode.uses_cellular() {
        for obs in &batch.cellular {
            let site = lookup_site(sites, obs.bs_id)
                .ok_or(Error::Argument("observation from unknown base station"))?;
            active.push(site);
        }
    }
    let imu = if mode.uses_imu() { batch.imu } else { None };
    let row_mode = match (imu.is_some(), !active.is_empty()) {
        (true, true) => Some(FusionMode::Fused),
        (true, false) => Some(FusionMode::ImuOnly),
        (false, true) => Some(FusionMode::FiveGOnly),
        (false, false) => None,
    };
    let Some(row_mode) = row_mode else {
        return Ok((state.clone(), Diagnostics::default()));
    };

    let lin = measurement_jacobian(&state.mean, &active, row_mode)?;
    let floor = config.obs_variance_floor;
    let mut rows = Vec::with_capacity(lin.kinds.len());
    for (i, kind) in lin.kinds.iter().enumerate() {
        let (measured, sigma) = match *kind {
            RowKind::Speed => {
                let r = imu.as_ref().expect("speed row implies imu");
                (r.speed_meas, r.sigma_speed_mps)
            }
            RowKind::AccelX => {
                let r = imu.as_ref().expect("accel row implies imu");
                (r.accel_meas.x, r.sigma_accel_mps2)
            }
            RowKind::AccelY => {
                let r = imu.as_ref().expect("accel row implies imu");
                (r.accel_meas.y, r.sigma_accel_mps2)
            }
            RowKind::Range { bs_id } => {
                let o = cellular_obs(batch, bs_id);
                (o.range_m, o.sigma_range_m)
            }
            RowKind::Azimuth { bs_id } => {
                let o = cellular_obs(batch, bs_id);
                (o.azimuth_rad, o.sigma_aoa_rad)
            }
            RowKind::Pseudo { .. } => unreachable!("sensor linearization has no pseudo rows"),
        };
        rows.push(ObservationRow {
            kind: *kind,
            measured,
            predicted: lin.predicted[i],
            jacobian: JacobianRow::from_fn(|_, j| lin.jacobian[(i, j)]),
            variance: (sigma * sigma).max(floor),
        });
    }

    let (next, mut diag) = update_with_rows(state, &rows, config.gate_chi2)?;
    diag.speed_row_dropped = lin.speed_row_dropped;
    Ok((next, diag))
}

fn lookup_site(sites: &[BsSite], id: u32) -> Option<BsSite> {
    match sites.get(id as usize) {
        Some(s) if s.id == id => Some(*s),
        _ => sites.iter().find(|s| s.id == id).copied(),
    }
}

fn cellular_obs(batch: &MeasurementBatch, bs_id: u32) -> &crate::measurements::CellularObservation {
    batch
        .cellular
        .iter()
        .find(|o| o.bs_id == bs_id)
        .expect("row built from this batch")
}

/// Stacked EKF correction from pre-linearized rows. Rows with infinite
/// variance are skipped; with `gate_chi2` set, rows whose normalized
/// innovation `y² / S_ii` exceeds it are skipped too.
pub fn update_with_rows(
    state: &EstimatorState,
    rows: &[ObservationRow],
    gate_chi2: Option<f64>,
) -> Result<(EstimatorState, Diagnostics)> {
    if !state.is_finite() {
        return Err(NumericError::NonFiniteState.into());
    }
    let p = &state.covariance;
    let mut diag = Diagnostics::default();
    let mut used: Vec<(ObservationRow, f64)> = Vec::with_capacity(rows.len());
    for row in rows {
        if row.variance.is_infinite() {
            diag.uninformative.push(row.kind);
            continue;
        }
        let y = row.innovation();
        if let Some(threshold) = gate_chi2 {
            let s = (row.jacobian * p * row.jacobian.transpose())[0] + row.variance;
            if s > 0.0 && y * y / s > threshold {
                diag.gated.push(row.kind);
                continue;
            }
        }
        used.push((*row, y));
    }
    if used.is_empty() {
        return Ok((state.clone(), diag));
    }

    let m = used.len();
    let h = DMatrix::from_fn(m, STATE_DIM, |i, j| used[i].0.jacobian[j]);
    let r = DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| used[i].0.variance));
    let y = DVector::from_fn(m, |i, _| used[i].1);
    let p_dyn = DMatrix::from_fn(STATE_DIM, STATE_DIM, |i, j| p[(i, j)]);

    let hp = &h * &p_dyn;
    let s = symmetrize_dyn(&hp * h.transpose() + &r);
    let chol = Cholesky::new(s.clone()).ok_or_else(|| {
        let kinds: Vec<RowKind> = used.iter().map(|(row, _)| row.kind).collect();
        NumericError::SingularInnovation {
            block: singular_block(&s, &kinds),
        }
    })?;
    // K = P Hᵀ S⁻¹, via Kᵀ = S⁻¹ (H P)
    let k = chol.solve(&hp).transpose();

    let mean_dyn = DVector::from_fn(STATE_DIM, |i, _| state.mean[i]) + &k * &y;
    let i_kh = DMatrix::<f64>::identity(STATE_DIM, STATE_DIM) - &k * &h;
    let p_post = &i_kh * &p_dyn * i_kh.transpose() + &k * &r * k.transpose();

    let next = EstimatorState {
        epoch: state.epoch,
        mean: StateVector::from_fn(|i, _| mean_dyn[i]),
        covariance: symmetrize(StateMatrix::from_fn(|i, j| p_post[(i, j)])),
    };
    if !next.is_finite() {
        return Err(NumericError::NonFiniteState.into());
    }
    diag.kinds = used.iter().map(|(row, _)| row.kind).collect();
    diag.innovation = y;
    diag.innovation_covariance = s;
    Ok((next, diag))
}

/// First observation block whose own diagonal sub-block of `s` is not
/// positive definite, else [`ObservationBlock::Stacked`].
fn singular_block(s: &DMatrix<f64>, kinds: &[RowKind]) -> ObservationBlock {
    let mut start = 0;
    while start < kinds.len() {
        let block = kinds[start].block();
        let mut end = start + 1;
        while end < kinds.len() && kinds[end].block() == block {
            end += 1;
        }
        let sub = s
            .view((start, start), (end - start, end - start))
            .clone_owned();
        if Cholesky::new(sub).is_none() {
            return block;
        }
        start = end;
    }
    ObservationBlock::Stacked
}

fn symmetrize(m: StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}

fn symmetrize_dyn(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
