//! Full simulation runs, pooled error reports, requirement checks and
//! parameter sweeps.

use alloc::vec::Vec;

use crate::ekf::{self, Diagnostics, EstimatorState, ProcessModel};
use crate::error::{Error, Result};
use crate::measurements::{sample_batch, ImuBias, MeasurementBatch};
use crate::scenario::{
    build_scenario, FusionMode, RequirementProfile, Scenario, ScenarioConfig, SigmaLevel,
    TruthSample,
};
use crate::stats::ErrorReport;
use crate::{rng_from_seed, SimRng, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub t_s: f64,
    pub truth: Vec2,
    pub estimate: Vec2,
    pub error_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub per_epoch: Vec<EpochRecord>,
    pub config: ScenarioConfig,
    pub seed: u64,
}

impl RunResult {
    /// Errors after the configured warm-up window.
    pub fn steady_state_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_epoch
            .iter()
            .skip(self.config.warmup_epochs)
            .map(|r| r.error_m)
    }
}

/// Filter stage reported to a [`run_traced`] observer.
#[derive(Debug)]
pub enum Stage<'a> {
    Initialized(&'a EstimatorState),
    Predicted(&'a EstimatorState),
    Updated(&'a EstimatorState, &'a Diagnostics),
}

pub fn run(config: &ScenarioConfig) -> Result<RunResult> {
    run_traced(config, |_| {})
}

/// Output of one [`Tracker`] epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerStep {
    pub truth: TruthSample,
    pub batch: MeasurementBatch,
    pub prior: EstimatorState,
    pub posterior: EstimatorState,
    pub diagnostics: Diagnostics,
}

/// Epoch-by-epoch filter driver: epoch 0 initializes from the noisy fix and
/// is corrected with its batch; every later epoch predicts then corrects.
/// A single random stream feeds the initial fix and all measurements.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: ScenarioConfig,
    scenario: Scenario,
    model: ProcessModel,
    rng: SimRng,
    bias: ImuBias,
    next_epoch: u64,
    state: Option<EstimatorState>,
}

impl Tracker {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let scenario = build_scenario(config)?;
        let model = ProcessModel::new(config.epoch_dt_s, config.filter.jerk_psd)?;
        Ok(Self {
            config: config.clone(),
            scenario,
            model,
            rng: rng_from_seed(config.seed),
            bias: ImuBias::default(),
            next_epoch: 0,
            state: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> Option<&EstimatorState> {
        self.state.as_ref()
    }

    /// Advances one epoch; `None` once the trajectory is exhausted. Numeric
    /// failures carry the epoch they happened at.
    pub fn step(&mut self) -> Result<Option<TrackerStep>> {
        if self.next_epoch as usize >= self.scenario.trajectory.len() {
            return Ok(None);
        }
        let truth = self.scenario.trajectory.sample(self.next_epoch);
        let at_epoch = |e: Error| match e {
            Error::Numeric(source) => Error::AtEpoch {
                epoch: truth.epoch,
                source,
            },
            other => other,
        };
        let prior = match self.state.take() {
            None => ekf::initialize(&truth, &self.config, &mut self.rng),
            Some(prev) => ekf::predict(&prev, &self.model).map_err(at_epoch)?,
        };
        let batch = sample_batch(
            &truth,
            &self.scenario.sites,
            &self.config,
            &mut self.rng,
            &mut self.bias,
        )
        .map_err(at_epoch)?;
        let (posterior, diagnostics) = ekf::update(
            &prior,
            &batch,
            &self.scenario.sites,
            self.config.mode,
            &self.config.filter,
        )
        .map_err(at_epoch)?;
        self.state = Some(posterior.clone());
        self.next_epoch += 1;
        Ok(Some(TrackerStep {
            truth,
            batch,
            prior,
            posterior,
            diagnostics,
        }))
    }
}

/// Runs the whole trajectory, handing every filter stage to `observe`.
pub fn run_traced<F>(config: &ScenarioConfig, mut observe: F) -> Result<RunResult>
where
    F: FnMut(Stage<'_>),
{
    let mut tracker = Tracker::new(config)?;
    let mut per_epoch = Vec::with_capacity(tracker.scenario().trajectory.len());
    while let Some(step) = tracker.step()? {
        if step.truth.epoch == 0 {
            observe(Stage::Initialized(&step.prior));
        } else {
            observe(Stage::Predicted(&step.prior));
        }
        observe(Stage::Updated(&step.posterior, &step.diagnostics));
        let estimate = step.posterior.position();
        per_epoch.push(EpochRecord {
            epoch: step.truth.epoch,
            t_s: step.truth.t_s,
            truth: step.truth.position,
            estimate,
            error_m: (estimate - step.truth.position).norm(),
        });
    }
    Ok(RunResult {
        per_epoch,
        config: config.clone(),
        seed: config.seed,
    })
}

/// Pools the post-warm-up errors of every run into one report.
pub fn cdf(results: &[RunResult]) -> Result<ErrorReport> {
    let samples: Vec<f64> = results
        .iter()
        .flat_map(|r| r.steady_state_errors())
        .collect();
    ErrorReport::from_samples(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequirementCheck {
    pub profile: &'static str,
    pub accuracy_m: f64,
    pub sigma_level: SigmaLevel,
    /// Error percentile at the profile's confidence level.
    pub achieved_m: f64,
    pub pass: bool,
    /// `accuracy_m - achieved_m`; negative when failing.
    pub margin_m: f64,
}

pub fn check_requirement(report: &ErrorReport, profile: &RequirementProfile) -> RequirementCheck {
    let sigma_level = profile.effective_sigma();
    let achieved_m = report.percentile(sigma_level.percentile());
    RequirementCheck {
        profile: profile.name,
        accuracy_m: profile.accuracy_m,
        sigma_level,
        achieved_m,
        pass: achieved_m <= profile.accuracy_m,
        margin_m: profile.accuracy_m - achieved_m,
    }
}

/// Grid of ISD, fused-BS count and mode values to compare.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub isd_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub modes: Vec<FusionMode>,
    /// Independent runs pooled per cell.
    pub seeds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepKey {
    pub isd_m: f64,
    pub n_bs: usize,
    pub mode: FusionMode,
}

/// One run of a sweep: a cell key, the seed index within the cell and the
/// fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub cell: usize,
    pub key: SweepKey,
    pub seed_index: u64,
    pub config: ScenarioConfig,
}

impl SweepJob {
    pub fn execute(&self) -> Result<RunResult> {
        run(&self.config)
    }
}

/// Expands the grid into jobs in canonical order: ISD, then N, then mode,
/// then seed index. Run `i` of a cell uses seed `base.seed ^ i`.
pub fn sweep_plan(base: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<SweepJob>> {
    if spec.isd_values.is_empty() || spec.n_values.is_empty() || spec.modes.is_empty() {
        return Err(Error::Argument("sweep value lists must be non-empty"));
    }
    if spec.seeds == 0 {
        return Err(Error::Argument("sweep needs at least one seed"));
    }
    let mut jobs = Vec::new();
    let mut cell = 0;
    for &isd_m in &spec.isd_values {
        for &n_bs in &spec.n_values {
            for &mode in &spec.modes {
                let key = SweepKey { isd_m, n_bs, mode };
                for seed_index in 0..spec.seeds {
                    let config = ScenarioConfig {
                        isd_m,
                        n_fused_bs: n_bs,
                        mode,
                        seed: base.seed ^ seed_index,
                        ..base.clone()
                    };
                    config.validate()?;
                    jobs.push(SweepJob {
                        cell,
                        key,
                        seed_index,
                        config,
                    });
                }
                cell += 1;
            }
        }
    }
    Ok(jobs)
}

/// Merges executed jobs (in any order) into one pooled report per cell, in
/// canonical cell order.
pub fn assemble_sweep(
    jobs: &[SweepJob],
    results: Vec<RunResult>,
) -> Result<Vec<(SweepKey, ErrorReport)>> {
    if jobs.len() != results.len() {
        return Err(Error::Argument("one result per sweep job required"));
    }
    let cells = jobs.iter().map(|j| j.cell + 1).max().unwrap_or(0);
    let mut pooled: Vec<(Option<SweepKey>, Vec<f64>)> =
        (0..cells).map(|_| (None, Vec::new())).collect();
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by_key(|&i| (jobs[i].cell, jobs[i].seed_index));
    for i in order {
        let slot = &mut pooled[jobs[i].cell];
        slot.0 = Some(jobs[i].key);
        slot.1.extend(results[i].steady_state_errors());
    }
    pooled
        .into_iter()
        .map(|(key, samples)| {
            let key = key.ok_or(Error::Argument("sweep cell without jobs"))?;
            Ok((key, ErrorReport::from_samples(samples)?))
        })
        .collect()
}

/// Sequential sweep. The std companion crate runs the same plan in parallel.
pub fn sweep(base: &ScenarioConfig, spec: &SweepSpec) -> Result<Vec<(SweepKey, ErrorReport)>> {
    let jobs = sweep_plan(base, spec)?;
    let results = jobs
        .iter()
        .map(SweepJob::execute)
        .collect::<Result<Vec<_>>>()?;
    assemble_sweep(&jobs, results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::NoiseConfig;
    use crate::scenario::find_profile;
    use alloc::vec;

    fn short(mode: FusionMode) -> ScenarioConfig {
        ScenarioConfig {
            mode,
            epochs: Some(300),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn noiseless_fused_run_is_exact() {
        let cfg = ScenarioConfig {
            noise: NoiseConfig::noiseless(),
            ..ScenarioConfig::default()
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.per_epoch.len(), 2769);
        assert!(r.per_epoch.iter().all(|e| e.error_m <= 1e-6));
        let report = cdf(&[r]).unwrap();
        for p in crate::scenario::builtin_requirement_profiles() {
            assert!(check_requirement(&report, p).pass);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        for mode in FusionMode::ALL {
            let cfg = short(mode);
            assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
        }
        let a = run(&short(FusionMode::Fused)).unwrap();
        let b = run(&ScenarioConfig {
            seed: 1,
            ..short(FusionMode::Fused)
        })
        .unwrap();
        assert_ne!(a.per_epoch, b.per_epoch);
    }

    #[test]
    fn record_errors_are_distances() {
        let r = run(&short(FusionMode::FiveGOnly)).unwrap();
        assert_eq!(r.per_epoch.len(), 300);
        for e in &r.per_epoch {
            assert_eq!(e.error_m, (e.estimate - e.truth).norm());
        }
    }

    #[test]
    fn cdf_skips_warmup_and_rejects_empty() {
        let r = run(&short(FusionMode::Fused)).unwrap();
        assert_eq!(cdf(core::slice::from_ref(&r)).unwrap().len(), 290);
        assert_eq!(cdf(&[r.clone(), r]).unwrap().len(), 580);
        assert!(cdf(&[]).is_err());
    }

    #[test]
    fn requirement_check_examples() {
        // p99.7 of 1000 evenly spaced samples in [0, 0.08] is 0.08·0.997
        let samples: Vec<f64> = (0..=1000).map(|i| 0.08 * i as f64 / 1000.0).collect();
        let report = ErrorReport::from_samples(samples).unwrap();
        let hd = find_profile("High-definition sensor sharing").unwrap();
        let c = check_requirement(&report, hd);
        assert!(c.pass);
        assert!((c.achieved_m - 0.08 * 0.997).abs() < 1e-12);
        assert!((c.margin_m - (0.1 - 0.08 * 0.997)).abs() < 1e-12);

        let flat = ErrorReport::from_samples(vec![0.08; 10]).unwrap();
        let c = check_requirement(&flat, hd);
        assert!(c.pass && (c.margin_m - 0.02).abs() < 1e-12);

        let jam = find_profile("Traffic jam warning (urban environment)").unwrap();
        let c = check_requirement(&ErrorReport::from_samples(vec![25.0; 10]).unwrap(), jam);
        assert!(!c.pass);
        assert_eq!(c.sigma_level, SigmaLevel::One);
    }

    #[test]
    fn sweep_plan_covers_grid_with_xor_seeds() {
        let base = ScenarioConfig {
            seed: 0b1010,
            ..short(FusionMode::Fused)
        };
        let spec = SweepSpec {
            isd_values: vec![100.0, 200.0],
            n_values: vec![1, 2, 3],
            modes: FusionMode::ALL.to_vec(),
            seeds: 4,
        };
        let jobs = sweep_plan(&base, &spec).unwrap();
        assert_eq!(jobs.len(), 18 * 4);
        assert_eq!(jobs.iter().map(|j| j.cell).max(), Some(17));
        let seeds: Vec<u64> = jobs
            .iter()
            .filter(|j| j.cell == 5)
            .map(|j| j.config.seed)
            .collect();
        assert_eq!(seeds, [10, 11, 8, 9]);
        assert!(sweep_plan(
            &base,
            &SweepSpec {
                modes: vec![],
                ..spec.clone()
            }
        )
        .is_err());
    }

    #[test]
    fn sweep_returns_one_report_per_cell_in_order() {
        let base = ScenarioConfig {
            epochs: Some(40),
            ..ScenarioConfig::default()
        };
        let spec = SweepSpec {
            isd_values: vec![100.0, 200.0],
            n_values: vec![1, 2, 3],
            modes: FusionMode::ALL.to_vec(),
            seeds: 2,
        };
        let table = sweep(&base, &spec).unwrap();
        assert_eq!(table.len(), 18);
        assert_eq!(table[0].0.isd_m, 100.0);
        assert_eq!(table[17].0.isd_m, 200.0);
        assert_eq!(table[17].0.mode, FusionMode::Fused);
        assert!(table.iter().all(|(_, r)| r.len() == 60));

        // shuffled execution order gives the same table
        let jobs = sweep_plan(&base, &spec).unwrap();
        let mut idx: Vec<usize> = (0..jobs.len()).rev().collect();
        idx.rotate_left(7);
        let shuffled_jobs: Vec<SweepJob> = idx.iter().map(|&i| jobs[i].clone()).collect();
        let results = shuffled_jobs.iter().map(|j| j.execute().unwrap()).collect();
        assert_eq!(assemble_sweep(&shuffled_jobs, results).unwrap(), table);
    }
}
