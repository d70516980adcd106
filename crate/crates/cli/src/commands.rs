use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use ttp_core::dataset::{Collector, Dataset};
use ttp_core::instance::{bundled_instance, InstanceGenerator};
use ttp_core::planner::{solve_with, Hooks, RolloutKind, StateEvaluator, StepStats};
use ttp_core::timetable::{polylines, polylines_csv, render_svg, TimetableSummary};
use ttp_core::vaf::parity::ParityFile;
use ttp_core::vaf::{synth, InputShape, Network, ValueNetwork};
use ttp_core::{validate_timetable, Instance, PlannerConfig, Simulator, Timetable, Variant};

use crate::manifest::{digest, Recorder};
use crate::{
    CollectArgs, GenArgs, InferCheckArgs, PlannerArgs, PlotArgs, RolloutArg, SolveArgs, ValidateArgs, VariantArg,
};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::load(path).with_context(|| format!("loading instance {}", path.display()))
}

fn load_timetable(path: &Path, instance: &Instance) -> Result<Timetable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tt = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        Timetable::from_csv(&text, instance)?
    };
    Ok(tt)
}

impl PlannerArgs {
    pub fn resolve(&self) -> Result<PlannerConfig> {
        let mut cfg = match &self.config {
            Some(p) => PlannerConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => PlannerConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(cb) = self.cb {
            cfg.cb = cb;
        }
        if let Some(v) = self.variant {
            cfg.variant = match v {
                VariantArg::Uct => Variant::Uct,
                VariantArg::Max1 => Variant::Max1,
                VariantArg::Max2 => Variant::Max2,
            };
        }
        if let Some(r) = self.rollout {
            cfg.rollout = match r {
                RolloutArg::Plain => RolloutKind::Plain,
                RolloutArg::Csav => RolloutKind::Csav,
            };
        }
        if let Some(cp) = self.cp {
            cfg.cp = cp;
        }
        if let Some(w) = &self.warmup {
            cfg.warmup_weights_path = Some(w.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn warmup(cfg: &PlannerConfig, sim: &Simulator) -> Result<Option<ValueNetwork>> {
    cfg.warmup_weights_path
        .as_ref()
        .map(|p| ValueNetwork::load(p, sim).with_context(|| format!("loading weights {}", p.display())))
        .transpose()
}

pub fn gen(a: GenArgs) -> Result<u8> {
    let mut rec = Recorder::new("gen");
    rec.manifest.seed = Some(a.seed);
    let base = match &a.line {
        Some(p) => load_instance(p)?,
        None => bundled_instance(),
    };
    let generator = InstanceGenerator::new(base.line).with_params(base.params).with_window(a.window);
    create_dir(&a.out)?;
    for seed in a.seed..a.seed + a.count {
        let inst = generator.generate(a.n, seed)?;
        let path = a.out.join(format!("instance_{seed:05}.json"));
        rec.write(&path, inst.to_json() + "\n")?;
    }
    rec.manifest.summary = serde_json::json!({ "trains": a.n, "count": a.count, "window": a.window });
    rec.finish(&a.out, 0)?;
    Ok(0)
}

fn steps_csv(steps: &[StepStats]) -> String {
    let mut out = String::from("step,best_action,best_value,rollouts,feasible_rollouts,nodes,wall_ms\n");
    for s in steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3}",
            s.step, s.best_action, s.best_value, s.rollouts, s.feasible_rollouts, s.nodes, s.wall_ms
        )
        .expect("writing to a String");
    }
    out
}

/// Short content id used for dataset splits.
fn instance_id(inst: &Instance) -> String {
    digest(inst)[..16].to_string()
}

pub fn solve(a: SolveArgs) -> Result<u8> {
    let mut rec = Recorder::new("solve");
    let cfg = a.planner.resolve()?;
    rec.config(&cfg);
    rec.manifest.seed = Some(cfg.seed);
    let inst = load_instance(&a.instance)?;
    let sim = Simulator::new(inst.clone());
    let net = warmup(&cfg, &sim)?;
    create_dir(&a.out)?;

    let mut dataset = match &a.samples {
        Some(dir) => {
            let input = InputShape {
                rows: sim.layout().row_count(),
                ..InputShape::CORRIDOR
            };
            Some(Dataset::open_or_create(dir, input, cfg.label)?)
        }
        None => None,
    };
    let mut collector = dataset
        .as_mut()
        .map(|ds| Collector::new(ds, instance_id(&inst), cfg.variant));
    let mut log_step = |s: &StepStats| {
        log::info!("step {} action {} value {:.5}", s.step, s.best_action, s.best_value);
    };
    let hooks = Hooks {
        evaluator: net.as_ref().map(|n| n as &dyn StateEvaluator),
        sink: collector.as_mut().map(|c| c as &mut dyn ttp_core::planner::SampleSink),
        on_step: Some(&mut log_step),
    };
    let res = solve_with(&sim, &cfg, hooks)?;
    let samples = match collector {
        Some(c) => Some(c.finish()?),
        None => None,
    };
    if let Some(dir) = &a.samples {
        rec.listed(dir);
    }

    let feasible = res.timetable.is_some();
    let summary = TimetableSummary {
        feasible,
        objective: res.objective(),
        trains: inst.trains.len(),
        decisions: sim.decision_count(),
        actions: res.actions.clone(),
    };
    if let Some(tt) = &res.timetable {
        rec.write(&a.out.join("timetable.csv"), tt.to_csv(&inst))?;
        rec.write(&a.out.join("timetable.json"), serde_json::to_string_pretty(tt)? + "\n")?;
    }
    rec.write(&a.out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    rec.write(&a.out.join("steps.csv"), steps_csv(&res.steps))?;
    rec.manifest.summary = serde_json::json!({
        "feasible": feasible,
        "objective": res.objective(),
        "rollouts": res.total_rollouts(),
        "samples": samples,
    });
    match res.objective() {
        Some(obj) => println!("feasible: total travel time {obj} min"),
        None => println!("no feasible timetable found ({:?})", res.final_state.status()),
    }
    let code = if feasible { 0 } else { 1 };
    rec.finish(&a.out, i32::from(code))?;
    Ok(code)
}

pub fn validate(a: ValidateArgs) -> Result<u8> {
    let mut rec = Recorder::new("validate");
    let inst = load_instance(&a.instance)?;
    let tt = load_timetable(&a.timetable, &inst)?;
    let report = validate_timetable(&inst, &tt);
    for v in &report.violations {
        println!("{v}");
    }
    println!(
        "{} violation(s); total travel time {} min",
        report.violations.len(),
        report.objective
    );
    let code = if report.is_feasible() { 0 } else { 1 };
    if let Some(out) = &a.out {
        create_dir(out)?;
        rec.write(&out.join("validation.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        rec.finish(out, i32::from(code))?;
    }
    Ok(code)
}

#[derive(Serialize)]
struct CollectRow {
    file: PathBuf,
    instance_id: String,
    feasible: bool,
    objective: Option<u64>,
    samples: usize,
}

pub fn collect(a: CollectArgs) -> Result<u8> {
    let mut rec = Recorder::new("collect");
    let cfg = a.planner.resolve()?;
    rec.config(&cfg);
    rec.manifest.seed = Some(cfg.seed);
    let mut files: Vec<PathBuf> = glob::glob(&a.instances)
        .with_context(|| format!("bad glob `{}`", a.instances))?
        .collect::<std::result::Result<_, _>>()?;
    files.sort();
    if files.is_empty() {
        bail!("no instance matches `{}`", a.instances);
    }
    create_dir(&a.out)?;

    let mut dataset: Option<Dataset> = None;
    let mut rows = Vec::new();
    for file in &files {
        let inst = load_instance(file)?;
        let sim = Simulator::new(inst.clone());
        let input = InputShape {
            rows: sim.layout().row_count(),
            full_cols: a.full_cols,
            local_cols: a.local_cols,
        };
        let ds = match &mut dataset {
            Some(ds) if ds.manifest().input == input => ds,
            Some(_) => bail!("{} is on a different line than the earlier instances", file.display()),
            None => dataset.insert(Dataset::open_or_create(&a.dataset, input, cfg.label)?),
        };
        let net = warmup(&cfg, &sim)?;
        let id = instance_id(&inst);
        let mut collector = Collector::new(ds, id.clone(), cfg.variant);
        let res = solve_with(
            &sim,
            &cfg,
            Hooks {
                evaluator: net.as_ref().map(|n| n as &dyn StateEvaluator),
                sink: Some(&mut collector),
                on_step: None,
            },
        )?;
        let samples = collector.finish()?;
        println!(
            "{}: {} samples, {}",
            file.display(),
            samples,
            res.objective().map_or("infeasible".to_string(), |o| format!("objective {o}"))
        );
        rows.push(CollectRow {
            file: file.clone(),
            instance_id: id,
            feasible: res.timetable.is_some(),
            objective: res.objective(),
            samples,
        });
    }
    rec.listed(&a.dataset);
    rec.write(&a.out.join("collect.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    let ds = dataset.expect("at least one instance");
    rec.manifest.summary = serde_json::json!({
        "instances": rows.len(),
        "train_samples": ds.manifest().samples(ttp_core::dataset::Split::Train),
        "test_samples": ds.manifest().samples(ttp_core::dataset::Split::Test),
    });
    rec.finish(&a.out, 0)?;
    Ok(0)
}

#[derive(Serialize)]
struct ParityRow {
    vector: usize,
    expected: f64,
    actual: f32,
    abs_error: f64,
}

pub fn infer_check(a: InferCheckArgs) -> Result<u8> {
    let mut rec = Recorder::new("infer-check");
    rec.manifest.seed = Some(a.seed);
    let doc = ParityFile::load(&a.parity)?;
    let base = a.parity.parent().unwrap_or(Path::new("."));
    let net = match &a.weights {
        Some(w) => Network::load(w).with_context(|| format!("loading weights {}", w.display()))?,
        None => doc.network(base)?,
    };
    let started = Instant::now();
    let report = doc.check(&net)?;
    let elapsed = started.elapsed();
    let rows: Vec<ParityRow> = report
        .expected
        .iter()
        .zip(&report.actual)
        .enumerate()
        .map(|(i, (e, y))| ParityRow {
            vector: i,
            expected: *e,
            actual: *y,
            abs_error: (e - f64::from(*y)).abs(),
        })
        .collect();
    for r in &rows {
        println!("vector {}: expected {:.7} got {:.7} |err| {:.2e}", r.vector, r.expected, r.actual, r.abs_error);
    }
    let mut random_ok = true;
    for v in 0..a.random {
        let (full, local) = synth::input_pair(net.input(), a.seed, v);
        let y = net.forward(&full, &local)?;
        if !y.is_finite() {
            println!("random input {v}: non-finite output {y}");
            random_ok = false;
        }
    }
    let ok = report.all_passed() && random_ok;
    println!(
        "{}: {}/{} within {:e}, max error {:.2e}, {:.1} ms",
        if ok { "PASS" } else { "FAIL" },
        report.passed(),
        report.expected.len(),
        report.tolerance,
        report.max_abs_error(),
        elapsed.as_secs_f64() * 1e3
    );
    let code = if ok { 0 } else { 1 };
    if let Some(out) = &a.out {
        create_dir(out)?;
        rec.write(&out.join("parity_report.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
        rec.manifest.summary = serde_json::json!({
            "passed": report.passed(),
            "vectors": report.expected.len(),
            "max_abs_error": report.max_abs_error(),
            "random_inputs": a.random,
        });
        rec.finish(out, i32::from(code))?;
    }
    Ok(code)
}

pub fn plot(a: PlotArgs) -> Result<u8> {
    let mut rec = Recorder::new("plot");
    let inst = load_instance(&a.instance)?;
    let tt = load_timetable(&a.timetable, &inst)?;
    create_dir(&a.out)?;
    rec.write(&a.out.join("polylines.csv"), polylines_csv(&polylines(&inst, &tt)))?;
    rec.write(&a.out.join("diagram.svg"), render_svg(&inst, &tt))?;
    rec.finish(&a.out, 0)?;
    Ok(0)
}
