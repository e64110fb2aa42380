use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::bayes::{decide, gaussian_loglik, update_beliefs, BeliefState};
use crate::bhattacharyya::all_pairs;
use crate::error::{Error, Result};
use crate::estimation::{kf_step, FilterState, OutputResponse, ResponseModel};
use crate::input_design::{
    design_bc, design_bd, design_ol, design_qta, design_sbc, prefix_pairs, Certificate, ConstraintSet, DesignOptions,
    OlPlan,
};
use crate::lin_models::{build_lifted, NoiseModel, StateSpaceModel};
use crate::linalg;

/// Draws joint process and measurement noise `[v; w]` with covariance
/// `[[R, Sᵀ], [S, Q]]` through a (possibly rank-deficient) square-root factor.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    factor: DMatrix<f64>,
    n_y: usize,
}

impl NoiseSampler {
    pub fn new(noise: &NoiseModel) -> Self {
        Self { factor: linalg::psd_factor(&noise.joint()), n_y: noise.r().nrows() }
    }

    /// Returns `(v, w)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let z = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample(StandardNormal));
        let e = &self.factor * z;
        let n_x = e.len() - self.n_y;
        (e.rows(0, self.n_y).into_owned(), e.rows(self.n_y, n_x).into_owned())
    }
}

/// `y = Cx + v`, `x_next = Ax + Bu + w`.
pub fn simulate_step<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    noise: &NoiseModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>) {
    step_with(model, &NoiseSampler::new(noise), x, u, rng)
}

fn step_with<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    sampler: &NoiseSampler,
    x: &DVector<f64>,
    u: &DVector<f64>,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>) {
    let (v, w) = sampler.sample(rng);
    let y = model.c() * x + v;
    let x_next = model.a() * x + model.b() * u + w;
    (x_next, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Model probabilities after this step's measurement.
    pub probs: Vec<f64>,
    pub certified: Certificate,
    pub design_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub method: Method,
    pub true_model: usize,
    pub decided: Option<usize>,
    /// Measurements taken before the decision, or `max_steps` if none.
    pub steps: usize,
    pub records: Vec<StepRecord>,
}

impl TrialRecord {
    pub fn correct(&self) -> bool {
        self.decided == Some(self.true_model)
    }

    pub fn mean_design_ms(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.records.iter().map(|r| r.design_ms).sum::<f64>() / self.records.len() as f64
        }
    }

    /// Share of certified steps among those with an applicable certificate.
    pub fn certified_fraction(&self) -> Option<f64> {
        let applicable = self.records.iter().filter(|r| r.certified != Certificate::NotApplicable).count();
        let yes = self.records.iter().filter(|r| r.certified == Certificate::Yes).count();
        (applicable > 0).then(|| yes as f64 / applicable as f64)
    }

    /// Equality ignoring wall-clock design times.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &TrialRecord| {
            let mut r = r.clone();
            r.records.iter_mut().for_each(|s| s.design_ms = 0.0);
            r
        };
        strip(self) == strip(other)
    }
}

/// Per-batch data shared by every trial of one configuration and method.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub cfg: ExperimentConfig,
    models: Vec<StateSpaceModel>,
    noises: Vec<NoiseModel>,
    samplers: Vec<NoiseSampler>,
    responses: Vec<ResponseModel>,
    ol_plan: Option<OlPlan>,
    x0_factor: DMatrix<f64>,
}

impl TrialContext {
    /// Validates `cfg` and precomputes the lifted models. The open-loop
    /// plan, when needed, is designed here once from the configured seed.
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let models = cfg.models();
        let noises = cfg.noises();
        let responses = models
            .iter()
            .zip(&noises)
            .map(|(m, n)| Ok(ResponseModel::new(&build_lifted(m, n, cfg.horizon)?)))
            .collect::<Result<Vec<_>>>()?;
        let ol_plan = if cfg.method == Method::Ol {
            let filters = vec![initial_filter(cfg)?; models.len()];
            let cs = cfg.constraint.build(cfg.horizon)?;
            Some(design_ol(
                &models,
                &noises,
                &filters,
                &cfg.initial_probs,
                &cs,
                cfg.ol_horizon,
                cfg.ol_starts,
                cfg.seed,
            )?)
        } else {
            None
        };
        Ok(Self {
            samplers: noises.iter().map(NoiseSampler::new).collect(),
            x0_factor: linalg::psd_factor(&cfg.x0_cov),
            cfg: cfg.clone(),
            models,
            noises,
            responses,
            ol_plan,
        })
    }

    pub fn ol_plan(&self) -> Option<&OlPlan> {
        self.ol_plan.as_ref()
    }

    fn design(&self, belief: &BeliefState, cs: &ConstraintSet, t: usize, seed: u64) -> Result<(DVector<f64>, Certificate)> {
        let cfg = &self.cfg;
        let opts = DesignOptions {
            vertex_cap: cfg.vertex_cap,
            random_starts: cfg.random_starts,
            seed: mix(&[seed, t as u64, 0xD5]),
            ..DesignOptions::default()
        };
        let n_u = cs.n_u;
        let first = |u: &DVector<f64>| u.rows(0, n_u).into_owned();
        match cfg.method {
            Method::None => Ok((first(&cs.neutral_point()), Certificate::NotApplicable)),
            Method::Ol => {
                let plan = self.ol_plan.as_ref().expect("open-loop plan is built with the context");
                Ok((plan.input_at(t, cs), Certificate::NotApplicable))
            }
            method => {
                let responses = self.respond(belief)?;
                let r = match method {
                    Method::Bd => design_bd(&all_pairs(&responses)?, cs, &opts)?,
                    Method::Qta => design_qta(&all_pairs(&responses)?, belief, cs, &opts)?,
                    Method::Bc => design_bc(&all_pairs(&responses)?, belief, cs, &opts)?,
                    Method::Sbc => {
                        let n_y = self.models[0].n_y();
                        design_sbc(&prefix_pairs(&responses, n_y, cfg.horizon)?, belief, cs, &opts)?
                    }
                    Method::None | Method::Ol => unreachable!(),
                };
                Ok((r.first_input, r.certified_concave))
            }
        }
    }

    fn respond(&self, belief: &BeliefState) -> Result<Vec<OutputResponse>> {
        self.responses.iter().zip(&belief.filters).map(|(r, f)| r.respond(f)).collect()
    }
}

pub(crate) fn initial_filter(cfg: &ExperimentConfig) -> Result<FilterState> {
    FilterState::new(cfg.x0_mean.clone(), cfg.x0_cov.clone())
}

/// SplitMix64-style mixing of a tuple of integers into one seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Runs one closed-loop experiment with the configured method.
pub fn run_trial(cfg: &ExperimentConfig, true_index: usize, seed: u64) -> Result<TrialRecord> {
    run_trial_with(&TrialContext::new(cfg)?, true_index, seed, seed)
}

/// Runs one experiment on a prepared context. Each step designs an input
/// from the current beliefs, applies its first block, measures the true
/// system and updates every filter and the model probabilities.
pub fn run_trial_with(ctx: &TrialContext, true_index: usize, seed: u64, trial_id: u64) -> Result<TrialRecord> {
    let cfg = &ctx.cfg;
    if true_index >= cfg.n_models() {
        return Err(Error::InvalidConfig("true model index out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = DVector::from_fn(cfg.x0_mean.len(), |_, _| rng.sample(StandardNormal));
    let mut x = &cfg.x0_mean + &ctx.x0_factor * z0;
    let mut belief = BeliefState::new(&cfg.initial_probs, vec![initial_filter(cfg)?; cfg.n_models()])?;
    let mut cs = cfg.constraint.build(cfg.horizon)?;
    let mut records = Vec::new();
    let mut decided = None;

    for t in 0..cfg.max_steps {
        if let Some(d) = decide(&belief, cfg.decision_threshold) {
            decided = Some(d);
            break;
        }
        let at = |e: Error| Error::AtStep { step: t, source: Box::new(e) };
        let start = Instant::now();
        let (u, certified) = ctx.design(&belief, &cs, t, seed).map_err(at)?;
        let design_ms = start.elapsed().as_secs_f64() * 1e3;

        let (x_next, y) = step_with(&ctx.models[true_index], &ctx.samplers[true_index], &x, &u, &mut rng);
        let mut filters = Vec::with_capacity(cfg.n_models());
        let mut logliks = Vec::with_capacity(cfg.n_models());
        for ((f, m), n) in belief.filters.iter().zip(&ctx.models).zip(&ctx.noises) {
            let (next, innov) = kf_step(f, m, n, &u, &y).map_err(at)?;
            logliks.push(gaussian_loglik(&y, &innov.mean, &innov.cov).map_err(at)?);
            filters.push(next);
        }
        belief = update_beliefs(&belief, &logliks).map_err(at)?;
        belief.filters = filters;

        records.push(StepRecord {
            u: u.iter().copied().collect(),
            y: y.iter().copied().collect(),
            probs: belief.probs(),
            certified,
            design_ms,
        });
        cs = cs.advanced(&u);
        x = x_next;
    }
    if decided.is_none() {
        decided = decide(&belief, cfg.decision_threshold);
    }
    Ok(TrialRecord { trial_id, method: cfg.method, true_model: true_index, decided, steps: records.len(), records })
}
