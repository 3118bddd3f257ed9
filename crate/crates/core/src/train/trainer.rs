//! Training protocols: bound minimization, linear loss with L2, the
//! pretrained-prior variant and the tanh baseline.
//!
//! All randomness is derived from `TrainConfig::seed` through labeled
//! streams: `"init"`, `"shuffle"` and `"batch"` per `(phase, epoch, batch)`,
//! `"pretrain"` and `"validation"` for splits, `"inference"` per repetition.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aggregate::{Evaluator, ForwardMode};
use crate::data::split_indices;
use crate::error::{Error, Result};
use crate::gradients::linear_loss;
use crate::network::{sgn, NetworkArchitecture, NetworkParams};
use crate::pacbayes::{
    assemble_bound_report, kl_network_divergence, BoundInputs, BoundReport, Provenance,
};
use crate::rng::RngStream;
use crate::train::adam::{AdamConfig, AdamState};
use crate::train::mlp::MlpParams;
use crate::train::objective::{objective_value_and_grad, Objective};
use crate::train::schedule::PlateauSchedule;
use crate::Params;

pub type Example<'a> = (&'a [f64], f64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Bound minimization from a random prior.
    Pbgnet,
    /// Bound minimization with a prior learned on half the training set.
    PbgnetPre,
    /// Linear loss + L2, selected on validation loss.
    PbgnetL,
    /// Linear loss + L2, selected on the bound.
    PbgnetLBnd,
    Mlp,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pbgnet,
        Method::PbgnetPre,
        Method::PbgnetL,
        Method::PbgnetLBnd,
        Method::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Pbgnet => "pbgnet",
            Method::PbgnetPre => "pbgnet_pre",
            Method::PbgnetL => "pbgnet_l",
            Method::PbgnetLBnd => "pbgnet_l_bnd",
            Method::Mlp => "mlp",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }

    pub fn minimizes_bound(&self) -> bool {
        matches!(self, Method::Pbgnet | Method::PbgnetPre)
    }

    pub fn uses_validation(&self) -> bool {
        matches!(self, Method::PbgnetL | Method::PbgnetLBnd | Method::Mlp)
    }

    pub fn certifies(&self) -> bool {
        *self != Method::Mlp
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub hidden_layers: usize,
    pub width: usize,
    pub mode: ForwardMode,
    pub lr: f64,
    pub weight_decay: f64,
    pub delta: f64,
    /// Union-bound multiplicity; the bound uses `delta / multiplicity`.
    pub multiplicity: usize,
    pub seed: u64,
    pub max_epochs: usize,
    /// `None` picks 32 below 20000 training rows, 64 otherwise.
    pub batch_size: Option<usize>,
    pub lr_patience: usize,
    pub stop_patience: usize,
    pub pretrain_epochs: usize,
    /// Passes over the data averaged for the final empirical loss in sampled mode.
    pub inference_repetitions: usize,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            hidden_layers: 1,
            width: 10,
            mode: ForwardMode::exact(),
            lr: 1e-2,
            weight_decay: 0.0,
            delta: 0.05,
            multiplicity: crate::pacbayes::DEFAULT_MULTIPLICITY,
            seed: 0,
            max_epochs: 150,
            batch_size: None,
            lr_patience: 5,
            stop_patience: 20,
            pretrain_epochs: 20,
            inference_repetitions: 20,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.hidden_layers == 0 || self.width == 0 {
            return bad("need at least one hidden layer of positive width".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight decay {} must be non-negative",
                self.weight_decay
            ));
        }
        if self.method.minimizes_bound() && self.weight_decay != 0.0 {
            return bad(format!("{} takes no weight decay", self.method.name()));
        }
        if self.method == Method::Mlp && matches!(self.mode, ForwardMode::Sampled { .. }) {
            return bad("mlp takes no sample size".into());
        }
        if let ForwardMode::Sampled { sample_size: 0 } = self.mode {
            return bad("sample size must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) || self.multiplicity == 0 {
            return bad(format!(
                "delta {} / multiplicity {} invalid",
                self.delta, self.multiplicity
            ));
        }
        if self.max_epochs == 0 || self.batch_size == Some(0) || self.inference_repetitions == 0 {
            return bad("epochs, batch size and repetitions must be positive".into());
        }
        AdamConfig {
            lr: self.lr,
            ..self.adam
        }
        .validate()
    }

    pub fn batch_size_for(&self, n_train: usize) -> usize {
        self.batch_size
            .unwrap_or(if n_train < 20_000 { 32 } else { 64 })
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta / self.multiplicity as f64
    }

    pub fn architecture(&self, input_dim: usize) -> Result<NetworkArchitecture> {
        NetworkArchitecture::uniform(input_dim, self.hidden_layers, self.width)
    }

    /// Evaluation repetitions implied by the mode.
    pub fn repetitions(&self) -> usize {
        match self.mode {
            ForwardMode::Exact { .. } => 1,
            ForwardMode::Sampled { .. } => self.inference_repetitions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Bam { params: Params },
    Mlp { params: MlpParams },
}

impl Model {
    pub fn architecture(&self) -> &NetworkArchitecture {
        match self {
            Model::Bam { params } => params.architecture(),
            Model::Mlp { params } => &params.arch,
        }
    }

    pub fn bam(&self) -> Option<&Params> {
        match self {
            Model::Bam { params } => Some(params),
            Model::Mlp { .. } => None,
        }
    }
}

/// Linear loss and 0-1 error of `sgn(output)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub linear_loss: f64,
    pub zero_one: f64,
    pub n: usize,
}

/// Outputs of `model` on every example. Example `i` uses
/// `rng.child("example", [i])` in sampled mode.
pub fn model_outputs(
    model: &Model,
    data: &[Example<'_>],
    mode: ForwardMode,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    match model {
        Model::Mlp { params } => Ok(data.iter().map(|(x, _)| params.output(x)).collect()),
        Model::Bam { params } => {
            let eval = Evaluator::new(params, mode)?;
            data.iter()
                .enumerate()
                .map(|(i, (x, _))| {
                    Ok(eval
                        .forward(x, &mut rng.child("example", &[i as u64]))?
                        .output())
                })
                .collect()
        }
    }
}

/// Averages over `repetitions` passes, pass `r` drawing from
/// `RngStream::derived(seed, "inference", [r])`. Exact and MLP models use one pass.
pub fn evaluate(
    model: &Model,
    data: &[Example<'_>],
    mode: ForwardMode,
    seed: u64,
    repetitions: usize,
) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let reps = match (model, mode) {
        (Model::Bam { .. }, ForwardMode::Sampled { .. }) => repetitions.max(1),
        _ => 1,
    };
    let mut loss = 0.0;
    let mut errors = 0usize;
    for r in 0..reps {
        let out = model_outputs(
            model,
            data,
            mode,
            &RngStream::derived(seed, "inference", &[r as u64]),
        )?;
        for (g, (_, y)) in out.iter().zip(data) {
            loss += linear_loss(*g, *y);
            errors += usize::from(sgn(*g) != *y);
        }
    }
    let total = (reps * data.len()) as f64;
    Ok(Metrics {
        linear_loss: loss / total,
        zero_one: errors as f64 / total,
        n: data.len(),
    })
}

/// Certificate for `params` against `prior` on `data`.
#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    params: &Params,
    prior: &Params,
    data: &[Example<'_>],
    mode: ForwardMode,
    seed: u64,
    repetitions: usize,
    delta: f64,
    multiplicity: usize,
    epoch: Option<usize>,
) -> Result<BoundReport> {
    let model = Model::Bam {
        params: params.clone(),
    };
    let m = evaluate(&model, data, mode, seed, repetitions)?;
    let (sample_size, reps) = match mode {
        ForwardMode::Exact { .. } => (None, 1),
        ForwardMode::Sampled { sample_size } => (Some(sample_size), repetitions.max(1)),
    };
    let kl = kl_network_divergence(params, prior)?;
    assemble_bound_report(
        BoundInputs {
            q: m.linear_loss.clamp(0.0, 1.0),
            kl,
            n: data.len(),
            delta,
            multiplicity,
        },
        Provenance {
            epoch,
            sample_size,
            repetitions: reps,
        },
    )
}

/// One JSON-lines row of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub phase: String,
    pub epoch: usize,
    /// Mean objective value over the epoch's mini-batches.
    pub cost: f64,
    pub lr: f64,
    /// Model-selection metric (lower is better).
    pub metric: f64,
    pub improved: bool,
    pub kl: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub clamped_psi: usize,
}

pub fn history_to_jsonl(history: &[HistoryRecord]) -> Result<String> {
    let mut out = String::new();
    for h in history {
        out.push_str(&serde_json::to_string(h)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSnapshot {
    pub epoch: usize,
    pub metric: f64,
    pub flat: Vec<f64>,
}

/// Optimizer state over a flat vector: network weights, then `gamma` when
/// the bound is the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub flat: Vec<f64>,
    pub adam: AdamState,
    pub schedule: PlateauSchedule,
    pub epoch: usize,
    pub best: Option<BestSnapshot>,
    pub seed: u64,
}

impl TrainState {
    pub fn new(flat: Vec<f64>, config: &TrainConfig) -> Self {
        Self {
            adam: AdamState::new(flat.len()),
            flat,
            schedule: PlateauSchedule::new(config.lr, config.lr_patience, config.stop_patience),
            epoch: 0,
            best: None,
            seed: config.seed,
        }
    }
}

struct StepEval {
    value: f64,
    /// Batch-mean linear loss.
    loss: f64,
    grad: Vec<f64>,
    clamped: usize,
}

/// Mini-batch averages over one epoch.
#[derive(Clone, Copy)]
struct EpochCosts {
    cost: f64,
    loss: f64,
}

struct EpochEval {
    metric: f64,
    kl: Option<f64>,
    c: Option<f64>,
}

struct Phase<'a> {
    name: &'static str,
    id: u64,
    data: &'a [Example<'a>],
    batch_size: usize,
    epochs: usize,
    early_stopping: bool,
}

fn run_phase(
    state: &mut TrainState,
    phase: &Phase<'_>,
    adam: &AdamConfig,
    step: &mut dyn FnMut(&[f64], &[Example<'_>], &RngStream) -> Result<StepEval>,
    epoch_eval: &mut dyn FnMut(&[f64], EpochCosts) -> Result<EpochEval>,
    history: &mut Vec<HistoryRecord>,
) -> Result<()> {
    if phase.data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let seed = state.seed;
    let mut order: Vec<usize> = (0..phase.data.len()).collect();
    let mut batch = Vec::with_capacity(phase.batch_size);
    for epoch in 1..=phase.epochs {
        let numeric = |e: Error| match e {
            Error::NonFinite(what) => Error::NonFiniteGradient {
                epoch,
                detail: what.to_string(),
            },
            e => e,
        };
        order.shuffle(&mut RngStream::derived(
            seed,
            "shuffle",
            &[phase.id, epoch as u64],
        ));
        let lr = state.schedule.lr;
        let mut cost = 0.0;
        let mut loss = 0.0;
        let mut clamped = 0;
        let chunks = order.chunks(phase.batch_size);
        let n_batches = chunks.len();
        for (b, chunk) in chunks.enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| phase.data[i]));
            let rng = RngStream::derived(seed, "batch", &[phase.id, epoch as u64, b as u64]);
            let ev = step(&state.flat, &batch, &rng).map_err(numeric)?;
            if !ev.value.is_finite() {
                return Err(Error::NonFiniteGradient {
                    epoch,
                    detail: format!("objective value {}", ev.value),
                });
            }
            state
                .adam
                .step(&mut state.flat, &ev.grad, lr, adam)
                .map_err(numeric)?;
            cost += ev.value;
            loss += ev.loss;
            clamped += ev.clamped;
        }
        cost /= n_batches as f64;
        loss /= n_batches as f64;
        state.epoch = epoch;
        let ev = epoch_eval(&state.flat, EpochCosts { cost, loss }).map_err(numeric)?;
        let (improved, stop) = if phase.early_stopping {
            let obs = state.schedule.observe(ev.metric);
            if obs.improved {
                state.best = Some(BestSnapshot {
                    epoch,
                    metric: ev.metric,
                    flat: state.flat.clone(),
                });
            }
            (obs.improved, obs.stop)
        } else {
            (false, false)
        };
        history.push(HistoryRecord {
            phase: phase.name.into(),
            epoch,
            cost,
            lr,
            metric: ev.metric,
            improved,
            kl: ev.kl,
            c: ev.c,
            clamped_psi: clamped,
        });
        if stop {
            break;
        }
    }
    if phase.early_stopping {
        if let Some(best) = &state.best {
            state.flat.clone_from(&best.flat);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub method: Method,
    pub model: Model,
    /// Prior of the certificate (random init, or the pretrained network).
    pub prior: Option<Params>,
    pub gamma: Option<f64>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub epochs_run: usize,
    pub final_lr: f64,
    pub history: Vec<HistoryRecord>,
    /// On every training example.
    pub train_metrics: Metrics,
    pub valid_metrics: Option<Metrics>,
    pub bound: Option<BoundReport>,
    /// Positions in the training examples the bound was computed on.
    pub bound_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

fn split_params(
    arch: &NetworkArchitecture,
    flat: &[f64],
    with_gamma: bool,
) -> Result<(Params, f64)> {
    let np = arch.num_params();
    let params = NetworkParams::from_flat(arch, &flat[..np])?;
    Ok((params, if with_gamma { flat[np] } else { 0.0 }))
}

fn subset<'a>(data: &[Example<'a>], idx: &[usize]) -> Vec<Example<'a>> {
    idx.iter().map(|&i| data[i]).collect()
}

fn bam_step<'a>(
    arch: &'a NetworkArchitecture,
    objective: &'a Objective,
    mode: ForwardMode,
) -> impl FnMut(&[f64], &[Example<'_>], &RngStream) -> Result<StepEval> + 'a {
    let with_gamma = matches!(objective, Objective::PacBound { .. });
    move |flat, batch, rng| {
        let (params, gamma) = split_params(arch, flat, with_gamma)?;
        let ev = objective_value_and_grad(&params, gamma, batch, objective, mode, rng)?;
        let mut grad = ev.grads.flatten();
        if with_gamma {
            grad.push(ev.grad_gamma);
        }
        Ok(StepEval {
            value: ev.value,
            loss: ev.loss,
            grad,
            clamped: ev.grads.clamped_psi,
        })
    }
}

/// Trains `config.method` on the training examples. Test data never enters.
pub fn train(config: &TrainConfig, data: &[Example<'_>]) -> Result<TrainOutcome> {
    config.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::Data(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    let dim = data[0].0.len();
    if let Some(i) = data.iter().position(|(x, _)| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: data[i].0.len(),
        });
    }
    let arch = config.architecture(dim)?;
    let seed = config.seed;
    let batch_size = config.batch_size_for(n);
    let mode = config.mode;
    let mut history = Vec::new();
    let init_rng = || RngStream::derived(seed, "init", &[]);

    if config.method == Method::Mlp {
        let parts = split_indices(n, &[0.8, 0.2], seed, "validation")?;
        let (fit, valid) = (subset(data, &parts[0]), subset(data, &parts[1]));
        let mut shape = MlpParams::init(&arch, &mut init_rng());
        let mut state = TrainState::new(shape.flatten(), config);
        let mut probe = shape.clone();
        let mut step = |flat: &[f64], batch: &[Example<'_>], _: &RngStream| {
            probe.unflatten(flat)?;
            let (value, grad) = probe.loss_and_grad(batch, config.weight_decay)?;
            Ok(StepEval {
                value,
                loss: value,
                grad,
                clamped: 0,
            })
        };
        let mut probe2 = shape.clone();
        let mut epoch_eval = |flat: &[f64], _: EpochCosts| {
            probe2.unflatten(flat)?;
            let m = evaluate(
                &Model::Mlp {
                    params: probe2.clone(),
                },
                &valid,
                mode,
                seed,
                1,
            )?;
            Ok(EpochEval {
                metric: m.linear_loss,
                kl: None,
                c: None,
            })
        };
        let phase = Phase {
            name: "main",
            id: 1,
            data: &fit,
            batch_size,
            epochs: config.max_epochs,
            early_stopping: true,
        };
        run_phase(
            &mut state,
            &phase,
            &config.adam,
            &mut step,
            &mut epoch_eval,
            &mut history,
        )?;
        shape.unflatten(&state.flat)?;
        let model = Model::Mlp { params: shape };
        return finish(
            config,
            data,
            model,
            None,
            None,
            state,
            history,
            None,
            parts[1].clone(),
            &valid,
        );
    }

    let init = NetworkParams::init_fan_in(&arch, &mut init_rng());
    let all: Vec<usize> = (0..n).collect();
    match config.method {
        Method::Pbgnet | Method::PbgnetPre => {
            let (prior, bound_idx) = if config.method == Method::PbgnetPre {
                let halves = split_indices(n, &[0.5, 0.5], seed, "pretrain")?;
                let first = subset(data, &halves[0]);
                let objective = Objective::LinearL2 { weight_decay: 0.0 };
                let mut state = TrainState::new(init.flatten(), config);
                let phase = Phase {
                    name: "pretrain",
                    id: 0,
                    data: &first,
                    batch_size,
                    epochs: config.pretrain_epochs,
                    early_stopping: false,
                };
                let mut step = bam_step(&arch, &objective, mode);
                let mut epoch_eval = |_: &[f64], e: EpochCosts| {
                    Ok(EpochEval {
                        metric: e.cost,
                        kl: None,
                        c: None,
                    })
                };
                run_phase(
                    &mut state,
                    &phase,
                    &config.adam,
                    &mut step,
                    &mut epoch_eval,
                    &mut history,
                )?;
                (
                    NetworkParams::from_flat(&arch, &state.flat)?,
                    halves[1].clone(),
                )
            } else {
                (init, all)
            };
            let bound_data = subset(data, &bound_idx);
            let objective = Objective::PacBound {
                n: bound_data.len(),
                delta_prime: config.delta_prime(),
                prior: prior.clone(),
            };
            let mut flat = prior.flatten();
            flat.push(0.0);
            let mut state = TrainState::new(flat, config);
            let phase = Phase {
                name: "main",
                id: 1,
                data: &bound_data,
                batch_size,
                epochs: config.max_epochs,
                early_stopping: true,
            };
            let mut step = bam_step(&arch, &objective, mode);
            let mut epoch_eval = |flat: &[f64], e: EpochCosts| {
                let (p, gamma) = split_params(&arch, flat, true)?;
                Ok(EpochEval {
                    metric: e.cost,
                    kl: Some(kl_network_divergence(&p, &prior)?),
                    c: Some(gamma.exp()),
                })
            };
            run_phase(
                &mut state,
                &phase,
                &config.adam,
                &mut step,
                &mut epoch_eval,
                &mut history,
            )?;
            let (params, gamma) = split_params(&arch, &state.flat, true)?;
            finish(
                config,
                data,
                Model::Bam { params },
                Some(prior),
                Some(gamma),
                state,
                history,
                Some(bound_idx),
                vec![],
                &[],
            )
        }
        Method::PbgnetL | Method::PbgnetLBnd => {
            let objective = Objective::LinearL2 {
                weight_decay: config.weight_decay,
            };
            let mut parts = split_indices(n, &[0.8, 0.2], seed, "validation")?;
            let valid_idx = parts.pop().unwrap();
            let fit_idx = parts.pop().unwrap();
            let fit = subset(data, &fit_idx);
            let valid = subset(data, &valid_idx);
            let mut state = TrainState::new(init.flatten(), config);
            let phase = Phase {
                name: "main",
                id: 1,
                data: &fit,
                batch_size,
                epochs: config.max_epochs,
                early_stopping: true,
            };
            let mut step = bam_step(&arch, &objective, mode);
            let method = config.method;
            let mut epoch_eval = |flat: &[f64], e: EpochCosts| {
                let params = NetworkParams::from_flat(&arch, flat)?;
                let kl = kl_network_divergence(&params, &init)?;
                let metric = if method == Method::PbgnetL {
                    evaluate(&Model::Bam { params }, &valid, mode, seed, 1)?.linear_loss
                } else {
                    // mini-batch loss stands in for the empirical risk
                    let inputs = BoundInputs {
                        q: e.loss.clamp(0.0, 1.0),
                        kl,
                        n: fit.len(),
                        delta: config.delta,
                        multiplicity: config.multiplicity,
                    };
                    assemble_bound_report(inputs, Provenance::default())?.seeger_bound
                };
                Ok(EpochEval {
                    metric,
                    kl: Some(kl),
                    c: None,
                })
            };
            run_phase(
                &mut state,
                &phase,
                &config.adam,
                &mut step,
                &mut epoch_eval,
                &mut history,
            )?;
            let params = NetworkParams::from_flat(&arch, &state.flat)?;
            finish(
                config,
                data,
                Model::Bam { params },
                Some(init),
                None,
                state,
                history,
                Some(fit_idx),
                valid_idx,
                &valid,
            )
        }
        Method::Mlp => unreachable!("handled above"),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    config: &TrainConfig,
    data: &[Example<'_>],
    model: Model,
    prior: Option<Params>,
    gamma: Option<f64>,
    state: TrainState,
    history: Vec<HistoryRecord>,
    bound_idx: Option<Vec<usize>>,
    validation_indices: Vec<usize>,
    valid: &[Example<'_>],
) -> Result<TrainOutcome> {
    let reps = config.repetitions();
    let (best_epoch, best_metric) = state
        .best
        .as_ref()
        .map_or((state.epoch, f64::NAN), |b| (b.epoch, b.metric));
    let train_metrics = evaluate(&model, data, config.mode, config.seed, reps)?;
    let valid_metrics = if valid.is_empty() {
        None
    } else {
        Some(evaluate(&model, valid, config.mode, config.seed, reps)?)
    };
    let bound = match (&model, &prior, &bound_idx) {
        (Model::Bam { params }, Some(mu), Some(idx)) => Some(bound_report(
            params,
            mu,
            &subset(data, idx),
            config.mode,
            config.seed,
            reps,
            config.delta,
            config.multiplicity,
            Some(best_epoch),
        )?),
        _ => None,
    };
    Ok(TrainOutcome {
        method: config.method,
        model,
        prior,
        gamma,
        best_epoch,
        best_metric,
        epochs_run: state.epoch,
        final_lr: state.schedule.lr,
        history,
        train_metrics,
        valid_metrics,
        bound,
        bound_indices: bound_idx.unwrap_or_default(),
        validation_indices,
    })
}
