//! The outer search loop, the uniform random-search baseline and the
//! statistics reported over a run.
//!
//! Each iteration samples a sequence, decodes and evaluates it, computes the
//! reward and applies the policy-gradient update, then folds the result into
//! the Pareto front and the running best. The best record only changes on a
//! strictly larger reward, so the earliest maximum wins.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, ControllerState, Rollout};
use crate::cost::MacroCostConfig;
use crate::error::{MonasError, Result};
use crate::evaluator::{
    Evaluator, LookupEvaluator, LookupTable, SurrogateEvaluator, SurrogateFixture,
};
use crate::pareto::{front_of, ParetoFront, ParetoPoint};
use crate::reward::{EvaluationResult, RewardSpec};
use crate::space::{ActionSequence, Architecture, MacroOp, SearchSpace, SpaceKind, MACRO_LAYERS};

/// Salt mixed into the seed of the random-search sampler.
const RANDOM_SEARCH_SALT: u64 = 0x5eed_7a11_d0e5_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorSpec {
    Surrogate {
        /// Surrogate constants file; the shipped fixture when absent.
        fixture: Option<PathBuf>,
    },
    Lookup {
        /// Results table; the shipped CondenseNet table when absent.
        table: Option<PathBuf>,
        /// Fall back to the shipped surrogate for architectures not in the table.
        fallback: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub space: SpaceKind,
    pub reward: RewardSpec,
    pub evaluator: EvaluatorSpec,
    pub iterations: usize,
    pub seed: u64,
    pub hidden: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub baseline_decay: Option<f64>,
    pub clip_norm: Option<f64>,
    /// Networks per policy-gradient update.
    pub batch_size: usize,
    /// Iterations per satisfaction-rate window.
    pub window: usize,
    pub cost: MacroCostConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(space: SpaceKind, reward: RewardSpec, iterations: usize, seed: u64) -> Self {
        let ctl = ControllerConfig::for_space(space, seed);
        RunConfig {
            space,
            reward,
            evaluator: EvaluatorSpec::Surrogate { fixture: None },
            iterations,
            seed,
            hidden: ctl.hidden,
            learning_rate: ctl.learning_rate,
            init_scale: ctl.init_scale,
            baseline_decay: ctl.baseline_decay,
            clip_norm: ctl.clip_norm,
            batch_size: 1,
            window: 50,
            cost: MacroCostConfig::default(),
            out_dir: PathBuf::from("monas-out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(MonasError::Config(
                "run.iterations must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(MonasError::Config("adam.lr must be positive".into()));
        }
        if self.hidden == 0 || self.batch_size == 0 || self.window == 0 {
            return Err(MonasError::Config(
                "controller.hidden, run.batch and run.window must be positive".into(),
            ));
        }
        if !(self.init_scale >= 0.0) {
            return Err(MonasError::Config(
                "controller.init_scale must be >= 0".into(),
            ));
        }
        if self.cost.channels == 0
            || self.cost.input_resolution == 0
            || self.cost.input_channels == 0
        {
            return Err(MonasError::Config(
                "cost dimensions must be positive".into(),
            ));
        }
        self.reward
            .validate()
            .map_err(|e| MonasError::Config(e.to_string()))
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            init_scale: self.init_scale,
            baseline_decay: self.baseline_decay,
            clip_norm: self.clip_norm,
            seed: self.seed,
        }
    }
}

pub fn build_evaluator(cfg: &RunConfig) -> Result<Box<dyn Evaluator>> {
    let surrogate = |fixture: &Option<PathBuf>| -> Result<SurrogateEvaluator> {
        let fx = match fixture {
            Some(p) => SurrogateFixture::parse(&std::fs::read_to_string(p)?)?,
            None => SurrogateFixture::shipped(),
        };
        let mut ev = SurrogateEvaluator::new(fx, cfg.seed);
        ev.cost = cfg.cost;
        Ok(ev)
    };
    Ok(match &cfg.evaluator {
        EvaluatorSpec::Surrogate { fixture } => Box::new(surrogate(fixture)?),
        EvaluatorSpec::Lookup { table, fallback } => {
            let table = match table {
                Some(p) => LookupTable::load(p)?,
                None => LookupTable::shipped(),
            };
            let mut ev = LookupEvaluator::new(table);
            if *fallback {
                ev.fallback = Some(surrogate(&None)?);
            }
            Box::new(ev)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub actions: ActionSequence,
    pub arch: Architecture,
    pub eval: EvaluationResult,
    pub reward: f64,
    pub grad_norm: f64,
    /// Best reward seen up to and including this iteration.
    pub best_reward: f64,
}

/// Operation counts over sampled macro architectures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpHistogram {
    /// Indexed like [`MacroOp::ALL`].
    pub totals: [u64; 6],
    /// `per_layer[layer][op]`
    pub per_layer: Vec<[u64; 6]>,
}

impl OpHistogram {
    pub fn from_archs<'a>(archs: impl IntoIterator<Item = &'a Architecture>) -> Option<Self> {
        let mut hist = OpHistogram {
            totals: [0; 6],
            per_layer: vec![[0; 6]; MACRO_LAYERS],
        };
        let mut any = false;
        for arch in archs {
            if let Architecture::Macro(m) = arch {
                any = true;
                for (l, layer) in m.layers.iter().enumerate() {
                    let k = layer.op.index();
                    hist.totals[k] += 1;
                    hist.per_layer[l][k] += 1;
                }
            }
        }
        any.then_some(hist)
    }

    pub fn total(&self) -> u64 {
        self.totals.iter().sum()
    }

    pub fn fraction(&self, op: MacroOp) -> f64 {
        self.totals[op.index()] as f64 / self.total().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub window: usize,
    /// Fraction of records meeting the hard constraint in each window; the
    /// last window may be partial. Empty for the mixed reward.
    pub window_rates: Vec<f64>,
    /// Over all records; `None` for the mixed reward.
    pub overall_rate: Option<f64>,
    pub op_histogram: Option<OpHistogram>,
}

pub fn compute_stats(
    records: &[IterationRecord],
    spec: &RewardSpec,
    window: usize,
) -> Result<SearchStats> {
    if window == 0 {
        return Err(MonasError::InvalidValue("window must be positive".into()));
    }
    let flags = records
        .iter()
        .map(|r| spec.satisfies(&r.eval))
        .collect::<Result<Vec<_>>>()?;
    let (window_rates, overall_rate) = if flags.iter().any(Option::is_none) || flags.is_empty() {
        (Vec::new(), None)
    } else {
        let ok: Vec<bool> = flags.into_iter().map(Option::unwrap).collect();
        let rate = |s: &[bool]| s.iter().filter(|&&b| b).count() as f64 / s.len() as f64;
        (ok.chunks(window).map(rate).collect(), Some(rate(&ok)))
    };
    Ok(SearchStats {
        window,
        window_rates,
        overall_rate,
        op_histogram: OpHistogram::from_archs(records.iter().map(|r| &r.arch)),
    })
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: IterationRecord,
    pub records: Vec<IterationRecord>,
    pub front: ParetoFront,
    pub stats: SearchStats,
    /// The trained controller; `None` for random search.
    pub controller: Option<ControllerState>,
}

struct Tracker {
    records: Vec<IterationRecord>,
    best: Option<usize>,
    front: ParetoFront,
}

impl Tracker {
    fn new(capacity: usize) -> Self {
        Tracker {
            records: Vec::with_capacity(capacity),
            best: None,
            front: ParetoFront::new(),
        }
    }

    fn push(&mut self, mut rec: IterationRecord) {
        let improved = match self.best {
            None => true,
            Some(b) => rec.reward > self.records[b].reward,
        };
        rec.best_reward = match (improved, self.best) {
            (false, Some(b)) => self.records[b].reward,
            _ => rec.reward,
        };
        if improved {
            self.best = Some(self.records.len());
        }
        self.front.insert(ParetoPoint {
            accuracy: rec.eval.accuracy,
            energy: rec.eval.energy_joules,
            arch: rec.arch.clone(),
            iteration: rec.iteration,
        });
        self.records.push(rec);
    }

    fn finish(self, cfg: &RunConfig, controller: Option<ControllerState>) -> Result<SearchOutcome> {
        let stats = compute_stats(&self.records, &cfg.reward, cfg.window)?;
        let best = self.records[self.best.expect("at least one iteration")].clone();
        Ok(SearchOutcome {
            best,
            records: self.records,
            front: self.front,
            stats,
            controller,
        })
    }
}

fn score(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    reward: &RewardSpec,
    iteration: usize,
    actions: &ActionSequence,
) -> Result<(Architecture, EvaluationResult, f64)> {
    let wrap = |e: MonasError| MonasError::Iteration {
        iteration,
        source: Box::new(e),
    };
    let arch = space.decode(actions).map_err(wrap)?;
    let eval = evaluator.evaluate(&arch).map_err(wrap)?;
    let r = reward.compute(&eval).map_err(wrap)?;
    if !r.is_finite() {
        return Err(wrap(MonasError::InvalidValue(format!(
            "non-finite reward {r}"
        ))));
    }
    Ok((arch, eval, r))
}

pub fn run_search(cfg: &RunConfig, evaluator: &dyn Evaluator) -> Result<SearchOutcome> {
    cfg.validate()?;
    let controller = ControllerState::new(SearchSpace::build(cfg.space), cfg.controller_config())?;
    run_search_from(cfg, evaluator, controller)
}

/// Continues training `controller` for `cfg.iterations` more iterations.
pub fn run_search_from(
    cfg: &RunConfig,
    evaluator: &dyn Evaluator,
    mut controller: ControllerState,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if controller.space().kind() != cfg.space {
        return Err(MonasError::Config(format!(
            "controller was built for the {} space, run is for {}",
            controller.space().kind(),
            cfg.space
        )));
    }
    let space = controller.space().clone();
    let started = Instant::now();
    let mut tracker = Tracker::new(cfg.iterations);
    let mut pending: Vec<(ActionSequence, Rollout, f64)> = Vec::with_capacity(cfg.batch_size);

    for iteration in 1..=cfg.iterations {
        let (actions, rollout) = controller.sample_sequence()?;
        let (arch, eval, reward) = score(&space, evaluator, &cfg.reward, iteration, &actions)?;
        pending.push((actions.clone(), rollout, reward));
        tracker.push(IterationRecord {
            iteration,
            actions,
            arch,
            eval,
            reward,
            grad_norm: 0.0,
            best_reward: reward,
        });

        if pending.len() == cfg.batch_size || iteration == cfg.iterations {
            let batch: Vec<_> = pending.iter().map(|(s, r, w)| (s, r, *w)).collect();
            let norm = controller
                .reinforce_batch(&batch)
                .map_err(|e| MonasError::Iteration {
                    iteration,
                    source: Box::new(e),
                })?;
            let n = tracker.records.len();
            for rec in &mut tracker.records[n - pending.len()..] {
                rec.grad_norm = norm;
            }
            pending.clear();
        }
    }
    log_timing("search", cfg, started);
    tracker.finish(cfg, Some(controller))
}

/// Same pipeline with every slot drawn uniformly and no learning.
pub fn run_random(cfg: &RunConfig, evaluator: &dyn Evaluator) -> Result<SearchOutcome> {
    cfg.validate()?;
    let space = SearchSpace::build(cfg.space);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ RANDOM_SEARCH_SALT);
    let started = Instant::now();
    let mut tracker = Tracker::new(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        let mut actions = ActionSequence::default();
        for slot in space.slots() {
            actions.actions.push(rng.random_range(0..slot.len()));
            actions.log_probs.push(-(slot.len() as f64).ln());
        }
        let (arch, eval, reward) = score(&space, evaluator, &cfg.reward, iteration, &actions)?;
        tracker.push(IterationRecord {
            iteration,
            actions,
            arch,
            eval,
            reward,
            grad_norm: 0.0,
            best_reward: reward,
        });
    }
    log_timing("random", cfg, started);
    tracker.finish(cfg, None)
}

/// `n` rollouts from `state` without updates, each decoded and evaluated.
pub fn sample_trained_controller(
    state: &mut ControllerState,
    evaluator: &dyn Evaluator,
    n: usize,
) -> Result<Vec<(Architecture, EvaluationResult)>> {
    let space = state.space().clone();
    (0..n)
        .map(|_| {
            let (seq, _) = state.sample_sequence()?;
            let arch = space.decode(&seq)?;
            let eval = evaluator.evaluate(&arch)?;
            Ok((arch, eval))
        })
        .collect()
}

/// Recomputes the front from the records; equals the incrementally built one.
pub fn records_front(records: &[IterationRecord]) -> ParetoFront {
    front_of(records.iter().map(|r| ParetoPoint {
        accuracy: r.eval.accuracy,
        energy: r.eval.energy_joules,
        arch: r.arch.clone(),
        iteration: r.iteration,
    }))
}

fn log_timing(what: &str, cfg: &RunConfig, started: Instant) {
    if std::env::var_os("MONAS_TIMING").is_some() {
        eprintln!(
            "[timing] {what}: {} iterations on {} in {:.3}s",
            cfg.iterations,
            cfg.space,
            started.elapsed().as_secs_f64()
        );
    }
}
