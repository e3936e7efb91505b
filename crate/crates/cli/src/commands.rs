use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dchoice_core::hv::{self, DetModel, DetSearch, LinearWitness};
use dchoice_core::scenario::{probability_table, raw_probability_table};
use dchoice_core::spacetime::{self, Schedule};
use dchoice_core::trials::{self, CountTable, RunPlan, SettingOrder, DEFAULT_RESAMPLES};
use dchoice_core::witness::IDW_TERMS;
use dchoice_core::{ProbabilityTable, Scenario, WitnessReport};
use serde::Serialize;

use crate::config::{self, RunConfig};
use crate::{BoundsArgs, ReportArgs, ScenarioArgs, SimulateArgs, SpacetimeArgs, WitnessKind};

const DEFAULT_TRIALS: u64 = 100_000;

/// Whether a command's checks passed; errors are reported separately.
pub enum Status {
    Ok,
    ValidationFailed,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_report(dir: &Path, report: &WitnessReport) -> Result<()> {
    write_json(dir, "report.json", report)?;
    report.write_csv(create(dir, "report.csv")?)?;
    Ok(())
}

#[derive(Serialize)]
struct ConditionalRow {
    i: usize,
    j: usize,
    alpha_pi: f64,
    beta_pi: f64,
    p_e: f64,
    p_d: f64,
}

#[derive(Serialize)]
struct CorrelatorRow {
    term: String,
    i: usize,
    j: usize,
    sign: f64,
    alpha_pi: f64,
    beta_pi: f64,
    correlator: f64,
}

/// Bar-chart data: conditional outcome probabilities per setting pair, and
/// the signed `⟨D_ij⟩` terms of `I_DW` when the table has them.
fn write_plot_data(dir: &Path, scenario: &Scenario, table: &ProbabilityTable) -> Result<()> {
    let (alphas, betas) = (scenario.alphas(), scenario.betas());
    let mut w = csv::Writer::from_writer(create(dir, "fig_conditional.csv")?);
    for (i, j, c) in table.iter() {
        let detected = c.detected();
        w.serialize(ConditionalRow {
            i,
            j,
            alpha_pi: alphas[i].as_pi(),
            beta_pi: betas[j].as_pi(),
            p_e: if detected > 0.0 {
                c.p_e / detected
            } else {
                f64::NAN
            },
            p_d: if detected > 0.0 {
                c.p_d / detected
            } else {
                f64::NAN
            },
        })?;
    }
    w.flush()?;

    if table.require_shape(3, 2).is_ok() {
        let mut w = csv::Writer::from_writer(create(dir, "fig_correlators.csv")?);
        for (i, j, sign) in IDW_TERMS {
            w.serialize(CorrelatorRow {
                term: format!("D{i}{j}"),
                i,
                j,
                sign,
                alpha_pi: alphas[i].as_pi(),
                beta_pi: betas[j].as_pi(),
                correlator: table.get(i, j)?.correlator(),
            })?;
        }
        w.flush()?;
    }
    Ok(())
}

fn print_report(report: &WitnessReport) {
    let se = |f: fn(&dchoice_core::witness::Uncertainties) -> Option<f64>| {
        report
            .uncertainties
            .as_ref()
            .and_then(f)
            .map_or(String::new(), |s| format!(" ± {s:.6}"))
    };
    if let Some(d) = report.det_abs {
        print!("|det W| = {d:.6}{}", se(|u| u.det_abs_se));
        match report.sigma_det {
            Some(s) => println!("  ({s:.1} σ above 0)"),
            None => println!(),
        }
    }
    if let Some(i) = report.i_dw {
        print!("I_DW    = {i:.6}{}", se(|u| u.i_dw_se));
        match report.sigma_idw {
            Some(s) => println!("  ({s:.1} σ above 3)"),
            None => println!(),
        }
    }
    if let Some(r) = report.r {
        println!("R       = {r:.6}{}", se(|u| u.r_se));
    }
}

fn scenario_config(args: &ScenarioArgs) -> Result<RunConfig> {
    let mut cfg = config::resolve(args.config.as_deref(), args.preset)?;
    if let Some(fsa) = args.fair_sampling {
        cfg.scenario = cfg.scenario.with_fair_sampling(fsa);
    }
    Ok(cfg)
}

pub fn predict(args: &ScenarioArgs) -> Result<Status> {
    let cfg = scenario_config(args)?;
    let out = config::output_dir(args.out.as_deref(), Some(&cfg))?;
    let table = probability_table(&cfg.scenario)?;
    let report = WitnessReport::analytic(&table);

    write_json(&out, "scenario.json", &cfg.scenario)?;
    table.write_csv(create(&out, "table.csv")?)?;
    write_report(&out, &report)?;
    write_plot_data(&out, &cfg.scenario, &table)?;
    print_report(&report);
    Ok(Status::Ok)
}

pub fn simulate(args: &SimulateArgs) -> Result<Status> {
    let cfg = scenario_config(&args.scenario)?;
    let out = config::output_dir(args.scenario.out.as_deref(), Some(&cfg))?;
    let base = cfg.plan.clone().unwrap_or(RunPlan {
        trials_per_setting: DEFAULT_TRIALS,
        seed: 0,
        setting_order: SettingOrder::RoundRobin,
    });
    let plan = RunPlan::new(
        args.trials.unwrap_or(base.trials_per_setting),
        args.seed.unwrap_or(base.seed),
        base.setting_order,
    )?;
    let resamples = args
        .resamples
        .or(cfg.resamples)
        .unwrap_or(DEFAULT_RESAMPLES);
    let fsa = cfg.scenario.fair_sampling();

    // Detectors see the raw per-trial distribution; fair sampling is applied in analysis.
    let counts = trials::sample(&raw_probability_table(&cfg.scenario)?, &plan);
    let estimated = trials::estimate(&counts, fsa)?;
    let report = trials::bootstrap_report(&counts, resamples, plan.seed, fsa)?;

    write_json(&out, "scenario.json", &cfg.scenario)?;
    counts.write_csv(create(&out, "counts.csv")?)?;
    estimated.write_csv(create(&out, "estimated_table.csv")?)?;
    write_report(&out, &report)?;
    write_plot_data(&out, &cfg.scenario, &estimated)?;
    print_report(&report);
    Ok(Status::Ok)
}

pub fn report(args: &ReportArgs) -> Result<Status> {
    let file = File::open(&args.counts)
        .with_context(|| format!("cannot read counts {}", args.counts.display()))?;
    let counts = CountTable::read_csv(file)
        .with_context(|| format!("invalid counts {}", args.counts.display()))?;
    let out = config::output_dir(args.out.as_deref(), None)?;
    let report = trials::bootstrap_report(
        &counts,
        args.resamples.unwrap_or(DEFAULT_RESAMPLES),
        args.seed.unwrap_or(0),
        args.fair_sampling.unwrap_or(false),
    )?;
    write_report(&out, &report)?;
    print_report(&report);
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct LinearBoundFile {
    witness: &'static str,
    dim: usize,
    #[serde(flatten)]
    bound: hv::LinearBound,
}

#[derive(Serialize)]
struct DetBoundFile {
    witness: &'static str,
    dim: usize,
    seed: u64,
    #[serde(flatten)]
    bound: hv::DetBound,
}

pub fn bounds(args: &BoundsArgs) -> Result<Status> {
    let out = config::output_dir(args.out.as_deref(), None)?;
    match args.witness {
        WitnessKind::Idw => {
            let bound = hv::classical_max_linear(&LinearWitness::dimension_witness(), args.dim)?;
            println!(
                "max I_DW over d={} strategies = {} ({} deterministic strategies checked)",
                args.dim, bound.value, bound.strategies_checked
            );
            write_json(
                &out,
                "bounds.json",
                &LinearBoundFile {
                    witness: "idw",
                    dim: args.dim,
                    bound,
                },
            )?;
        }
        WitnessKind::Det => {
            let seed = args.seed.unwrap_or(0);
            let search = DetSearch {
                dim: args.dim,
                restarts: args.restarts,
                steps: args.steps,
                seed,
                model: args.model.into(),
                ..DetSearch::default()
            };
            let bound = hv::classical_max_det(&search)?;
            println!(
                "max |det W| over d={} deterministic strategies = {} ({} checked)",
                args.dim, bound.vertex_max, bound.vertices_checked
            );
            println!(
                "max |det W| over {:?} mixtures = {:.3e} ({} restarts)",
                bound.model, bound.mixture_max, bound.restarts
            );
            write_json(
                &out,
                "bounds.json",
                &DetBoundFile {
                    witness: "det",
                    dim: args.dim,
                    seed,
                    bound,
                },
            )?;
        }
    }
    Ok(Status::Ok)
}

pub fn spacetime(args: &SpacetimeArgs) -> Result<Status> {
    let schedule = match (&args.schedule, &args.config) {
        (Some(path), _) => load_schedule(path)?,
        (None, Some(path)) => RunConfig::load(path)?
            .schedule
            .context("config has no `schedule` section")?,
        (None, None) => Schedule::lab_geometry(),
    };
    let report = spacetime::validate(&schedule)?;
    let out = config::output_dir(args.out.as_deref(), None)?;
    write_json(&out, "spacetime.json", &report)?;
    for c in &report.conditions {
        println!(
            "{} {}  margin {:+.3} ns  {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.margin_ns,
            c.description
        );
    }
    Ok(if report.all_passed() {
        Status::Ok
    } else {
        Status::ValidationFailed
    })
}

fn load_schedule(path: &PathBuf) -> Result<Schedule> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read schedule {}", path.display()))?;
    Schedule::from_json(&text).with_context(|| format!("invalid schedule {}", path.display()))
}

impl From<crate::ModelArg> for DetModel {
    fn from(m: crate::ModelArg) -> Self {
        match m {
            crate::ModelArg::Independent => DetModel::IndependentDevices,
            crate::ModelArg::Shared => DetModel::SharedRandomness,
        }
    }
}
