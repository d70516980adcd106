//! Monte Carlo tree search over dwell-time sequences.
//!
//! One decision is committed per step after `cb` search iterations. Each
//! iteration selects down the tree with UCB, expands one untried action,
//! rolls out to a terminal state and backs the value up to the root.

pub mod rollout;
pub mod tree;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Minutes};
use crate::sim::{SimState, Simulator, Status};
use crate::timetable::Timetable;

pub use rollout::{csav_value, default_policy, RolloutKind, RolloutOutcome, Valuer};
pub use tree::{ucb, Node, NodeId, Score, Tree};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// UCB on mean value; commit on mean value.
    #[default]
    #[serde(rename = "uct", alias = "UCT")]
    Uct,
    /// UCB on mean value; commit on best value seen.
    #[serde(rename = "max1", alias = "UCT_MAX1")]
    Max1,
    /// UCB and commit both on best value seen.
    #[serde(rename = "max2", alias = "UCT_MAX2")]
    Max2,
}

impl Variant {
    pub fn select_score(self) -> Score {
        match self {
            Variant::Uct | Variant::Max1 => Score::Mean,
            Variant::Max2 => Score::Max,
        }
    }

    pub fn commit_score(self) -> Score {
        match self {
            Variant::Uct => Score::Mean,
            Variant::Max1 | Variant::Max2 => Score::Max,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Uct => "uct",
            Variant::Max1 => "max1",
            Variant::Max2 => "max2",
        }
    }
}

/// Label attached to collected samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    #[default]
    Mean,
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub variant: Variant,
    pub rollout: RolloutKind,
    /// Search iterations per committed decision.
    pub cb: u32,
    pub cp: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub label: LabelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_weights_path: Option<PathBuf>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            variant: Variant::Uct,
            rollout: RolloutKind::Plain,
            cb: 10_000,
            cp: 0.7,
            alpha: 1e-3,
            beta: 2.5e-4,
            seed: 0,
            label: LabelKind::Mean,
            warmup_weights_path: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cb == 0 {
            return Err(Error::Config("cb must be at least 1".into()));
        }
        if !self.cp.is_finite() || self.cp < 0.0 {
            return Err(Error::Config(format!("cp must be finite and >= 0, got {}", self.cp)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.alpha + self.beta >= 1.0 {
            return Err(Error::Config(format!(
                "alpha + beta must be < 1, got {}",
                self.alpha + self.beta
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: PlannerConfig = serde_path_to_error::deserialize(de).map_err(Error::from_json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn valuer(&self) -> Valuer {
        match self.rollout {
            RolloutKind::Plain => Valuer::plain(),
            RolloutKind::Csav => Valuer::csav(self.alpha, self.beta),
        }
    }
}

/// Prior value for a freshly expanded node, from the node's state and the
/// states one and two levels above it.
pub trait StateEvaluator {
    fn evaluate(
        &self,
        sim: &Simulator,
        state: &SimState,
        parent: &SimState,
        grandparent: Option<&SimState>,
    ) -> f64;
}

/// A visited child of the root at the end of a decision step.
pub struct ChildSample<'a> {
    pub step: usize,
    pub action: Minutes,
    pub label: f64,
    pub visits: u64,
    pub state: &'a SimState,
    pub parent: &'a SimState,
    pub grandparent: Option<&'a SimState>,
}

pub trait SampleSink {
    fn accept(&mut self, sim: &Simulator, sample: ChildSample<'_>) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub best_action: Minutes,
    pub best_value: f64,
    pub rollouts: u64,
    pub feasible_rollouts: u64,
    /// Tree size after the step's iterations, before re-rooting.
    pub nodes: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Feasible,
    InfeasibleRun,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub actions: Vec<Minutes>,
    pub timetable: Option<Timetable>,
    pub steps: Vec<StepStats>,
    pub final_state: SimState,
}

impl SolveResult {
    pub fn objective(&self) -> Option<u64> {
        self.timetable.as_ref().map(|t| t.objective)
    }

    pub fn total_rollouts(&self) -> u64 {
        self.steps.iter().map(|s| s.rollouts).sum()
    }
}

#[derive(Default)]
pub struct Hooks<'a> {
    pub evaluator: Option<&'a dyn StateEvaluator>,
    pub sink: Option<&'a mut dyn SampleSink>,
    pub on_step: Option<&'a mut dyn FnMut(&StepStats)>,
}

/// Solves `instance`, loading the warm-up network named by the config if any.
pub fn solve(instance: Instance, config: &PlannerConfig) -> Result<SolveResult> {
    let sim = Simulator::new(instance);
    let net = match &config.warmup_weights_path {
        Some(path) => Some(crate::vaf::ValueNetwork::load(path, &sim)?),
        None => None,
    };
    let hooks = Hooks {
        evaluator: net.as_ref().map(|n| n as &dyn StateEvaluator),
        ..Hooks::default()
    };
    solve_with(&sim, config, hooks)
}

/// Independent stream per (seed, step, iteration).
fn iteration_rng(seed: u64, step: usize, iteration: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((step as u64) << 32) | u64::from(iteration));
    rng
}

struct Search<'s> {
    sim: &'s Simulator,
    cfg: &'s PlannerConfig,
    valuer: Valuer,
    tree: Tree,
    root_state: SimState,
    /// State of the previously committed root.
    root_parent: Option<SimState>,
    /// Multiplier on every backed-up value.
    scale: f64,
}

impl Search<'_> {
    /// One selection, expansion, rollout and backup. Returns the terminal
    /// status reached.
    fn iterate(&mut self, rng: &mut ChaCha8Rng, evaluator: Option<&dyn StateEvaluator>) -> Result<Status> {
        let sim = self.sim;
        let mut node = Tree::ROOT;
        let mut state = self.root_state.clone();
        // Ancestor states are needed only when warming new nodes.
        let mut parent: Option<SimState> = None;
        let mut grandparent: Option<SimState> = None;
        let mut depth = 0usize;

        loop {
            if let Some(t) = self.tree.node(node).terminal {
                self.tree.backup(node, t.value);
                return Ok(t.status);
            }
            if self.tree.untried_count(node) > 0 {
                let pick = rng.random_range(0..self.tree.untried_count(node));
                let action = self.tree.take_untried(node, pick).expect("untried action present");
                let child = self.tree.add_child(node, action);
                if evaluator.is_some() {
                    grandparent = if depth == 0 {
                        self.root_parent.clone()
                    } else {
                        parent.take()
                    };
                    parent = Some(state.clone());
                }
                sim.apply(&mut state, action)?;
                if let Some(ev) = evaluator {
                    let p = parent.as_ref().expect("parent recorded");
                    let v = ev.evaluate(sim, &state, p, grandparent.as_ref());
                    self.tree.warm(child, v);
                }
                if state.is_terminal() {
                    let t = tree::Terminal {
                        status: state.status(),
                        value: self.scale * self.valuer.value(sim, &state)?,
                    };
                    self.tree.node_mut(child).terminal = Some(t);
                    self.tree.backup(child, t.value);
                    return Ok(t.status);
                }
                let out = default_policy(sim, &mut state, rng, &self.valuer)?;
                self.tree.backup(child, self.scale * out.value);
                return Ok(out.status);
            }
            let next = self.tree.best_child(node, self.cfg.cp, self.cfg.variant.select_score())?;
            if evaluator.is_some() {
                grandparent = if depth == 0 {
                    self.root_parent.clone()
                } else {
                    parent.take()
                };
                parent = Some(state.clone());
            }
            sim.apply(&mut state, self.tree.node(next).action)?;
            node = next;
            depth += 1;
        }
    }

    fn collect(&self, step: usize, sink: &mut dyn SampleSink) -> Result<()> {
        let kind = self.cfg.label;
        for &c in &self.tree.root().children {
            let child = self.tree.node(c);
            if child.n == 0 {
                continue;
            }
            let state = self.sim.step(&self.root_state, child.action)?;
            let label = match kind {
                LabelKind::Mean => child.mean(),
                LabelKind::Max => child.q_max,
            };
            sink.accept(
                self.sim,
                ChildSample {
                    step,
                    action: child.action,
                    label,
                    visits: child.n,
                    state: &state,
                    parent: &self.root_state,
                    grandparent: self.root_parent.as_ref(),
                },
            )?;
        }
        Ok(())
    }
}

/// Runs the full decision loop: `cb` iterations per step, then commits one
/// dwell and keeps the chosen subtree.
pub fn solve_with(sim: &Simulator, config: &PlannerConfig, hooks: Hooks<'_>) -> Result<SolveResult> {
    run(sim, config, hooks, 1.0)
}

fn run(sim: &Simulator, config: &PlannerConfig, mut hooks: Hooks<'_>, scale: f64) -> Result<SolveResult> {
    config.validate()?;
    let root_state = sim.init_state();
    let mut search = Search {
        sim,
        cfg: config,
        valuer: config.valuer(),
        tree: Tree::new(sim.max_action()),
        root_state,
        root_parent: None,
        scale,
    };
    let mut actions = Vec::with_capacity(sim.decision_count());
    let mut steps = Vec::with_capacity(sim.decision_count());

    while !search.root_state.is_terminal() {
        let step = actions.len();
        let started = Instant::now();
        let mut feasible = 0u64;
        for it in 0..config.cb {
            let mut rng = iteration_rng(config.seed, step, it);
            if search.iterate(&mut rng, hooks.evaluator)? == Status::Success {
                feasible += 1;
            }
        }
        if let Some(sink) = hooks.sink.as_deref_mut() {
            search.collect(step, sink)?;
        }
        let chosen = search
            .tree
            .commit_choice(Tree::ROOT, config.variant.commit_score())
            .expect("at least one iteration visits a root child");
        let node = search.tree.node(chosen);
        let best_value = match config.variant.commit_score() {
            Score::Mean => node.mean(),
            Score::Max => node.q_max,
        };
        let stats = StepStats {
            step,
            best_action: node.action,
            best_value,
            rollouts: u64::from(config.cb),
            feasible_rollouts: feasible,
            nodes: search.tree.len(),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        log::debug!(
            "step {step}: action {} value {best_value:.5} ({feasible}/{} feasible, {} nodes)",
            stats.best_action,
            config.cb,
            stats.nodes
        );
        if let Some(f) = hooks.on_step.as_deref_mut() {
            f(&stats);
        }
        let action = node.action;
        let next_state = sim.step(&search.root_state, action)?;
        let prev = std::mem::replace(&mut search.root_state, next_state);
        search.root_parent = Some(prev);
        search.tree.reroot(chosen);
        actions.push(action);
        steps.push(stats);
    }

    let final_state = search.root_state;
    let status = if final_state.status() == Status::Success {
        SolveStatus::Feasible
    } else {
        SolveStatus::InfeasibleRun
    };
    Ok(SolveResult {
        status,
        actions,
        timetable: sim.timetable(&final_state),
        steps,
        final_state,
    })
}
