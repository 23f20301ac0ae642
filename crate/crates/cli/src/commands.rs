//! Subcommand implementations.

use crate::config::*;
use anyhow::bail;
use horizonlab_core::arloss::HorizonLossConfig;
use horizonlab_core::dynamics::{
    self, integrate, lyapunov_spectrum, write_atomic, Method, SystemSpec, Trajectory,
};
use horizonlab_core::landscape::{self, LandscapeProbe, ProbeKind};
use horizonlab_core::net::{self, MlpConfig, ParamVector};
use horizonlab_core::optimize::{self, SweepCell, TrainReport};
use horizonlab_core::rng::mix;
use horizonlab_core::scheduler;
use std::collections::BTreeMap;
use std::path::Path;

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn out_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

// ----------------------------------------------------------------- simulate

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    system: &str,
    params: Option<Vec<f64>>,
    dt: Option<f64>,
    steps: usize,
    seed: u64,
    x0: Option<Vec<f64>>,
    sigma: f64,
    hopf: bool,
    method: Method,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let mut spec = SystemSpec::by_name(system)?;
    if spec.kind == dynamics::SystemKind::External {
        bail!("system 'external' has no built-in vector field; use `ingest` for external data");
    }
    if let Some(p) = params {
        spec = spec.with_params(p)?;
    }
    spec = spec.with_hopf_normal_form(hopf);
    spec.validate()?;
    let dt = dt.unwrap_or(spec.default_dt);
    let x0 = x0.unwrap_or_else(|| spec.default_initial_state(seed));
    let mut traj = integrate(&spec, &x0, dt, steps, method)?.with_seed(seed);
    if sigma > 0.0 {
        traj = dynamics::add_observation_noise(&traj, sigma, seed);
    }
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("trajectory.csv");
    traj.write_csv(&csv_path)?;
    let meta_path = out_dir.join("trajectory.meta.json");
    write_text(
        &meta_path,
        &serde_json::to_string_pretty(&traj.meta(&spec))?,
    )?;
    let config = serde_json::json!({
        "system": system, "params": spec.params, "dt": dt, "steps": steps,
        "seed": seed, "x0": x0, "sigma": sigma, "hopf_normal_form": hopf,
        "method": method,
    });
    write_manifest(
        out_dir,
        "simulate",
        &config,
        &[out_name(&csv_path), out_name(&meta_path)],
        "ok",
        &[],
    )?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

// ------------------------------------------------------------------- ingest

pub fn cmd_ingest(input: &Path, normalize: bool, out_dir: &Path) -> anyhow::Result<()> {
    let mut traj = Trajectory::read_csv(input)?;
    traj.validate()?;
    if normalize {
        traj = dynamics::normalize(&traj)?;
    }
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("trajectory.csv");
    traj.write_csv(&csv_path)?;
    let spec = SystemSpec::external(traj.dim(), traj.dt);
    write_text(
        &out_dir.join("trajectory.meta.json"),
        &serde_json::to_string_pretty(&traj.meta(&spec))?,
    )?;
    let config = serde_json::json!({
        "input": input, "normalize": normalize,
    });
    write_manifest(
        out_dir,
        "ingest",
        &config,
        &[out_name(&csv_path), "trajectory.meta.json".into()],
        "ok",
        &[],
    )?;
    println!("validated {} samples of dimension {}", traj.len(), traj.dim());
    Ok(())
}

// ----------------------------------------------------------------- lyapunov

pub fn cmd_lyapunov(
    system: &str,
    dt: Option<f64>,
    steps: usize,
    discard: usize,
    seed: u64,
    hopf: bool,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let spec = SystemSpec::by_name(system)?.with_hopf_normal_form(hopf);
    spec.validate()?;
    let dt = dt.unwrap_or(spec.default_dt);
    let x0 = spec.default_initial_state(seed);
    // settle onto the attractor before measuring
    let settle = integrate(&spec, &x0, dt, (steps / 5).max(10), Method::Rk4)?;
    let start = settle.row(settle.len() - 1).to_vec();
    let exps = lyapunov_spectrum(&spec, &start, dt, steps, discard)?;
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("index,lambda\n");
    for (i, l) in exps.iter().enumerate() {
        csv.push_str(&format!("{i},{l:.16e}\n"));
    }
    let csv_path = out_dir.join("lyapunov.csv");
    write_text(&csv_path, &csv)?;
    let config = serde_json::json!({
        "system": system, "dt": dt, "steps": steps, "discard": discard,
        "seed": seed, "hopf_normal_form": hopf,
    });
    write_manifest(out_dir, "lyapunov", &config, &[out_name(&csv_path)], "ok", &[])?;
    println!(
        "lyapunov spectrum: [{}]",
        exps.iter()
            .map(|l| format!("{l:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

// -------------------------------------------------------------------- train

fn write_train_outputs(
    out_dir: &Path,
    report: &TrainReport,
    config: &MlpConfig,
) -> anyhow::Result<Vec<String>> {
    std::fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    let mut curves = String::from("step,loss,grad_norm\n");
    for (i, (l, g)) in report
        .loss_curve
        .iter()
        .zip(&report.grad_norm_curve)
        .enumerate()
    {
        curves.push_str(&format!("{i},{l:.16e},{g:.16e}\n"));
    }
    write_text(&out_dir.join("curves.csv"), &curves)?;
    outputs.push("curves.csv".into());

    let mut val = String::from("epoch,val_squared,val_euclidean\n");
    for (i, (s, e)) in report
        .val_curve
        .iter()
        .zip(&report.val_curve_euclidean)
        .enumerate()
    {
        val.push_str(&format!("{i},{s:.16e},{e:.16e}\n"));
    }
    write_text(&out_dir.join("val_curve.csv"), &val)?;
    outputs.push("val_curve.csv".into());

    report
        .final_params
        .write(&out_dir.join("model.bin"), &out_dir.join("model.json"))?;
    report.best_params.write(
        &out_dir.join("best_model.bin"),
        &out_dir.join("best_model.json"),
    )?;
    outputs.extend(
        ["model.bin", "model.json", "best_model.bin", "best_model.json"]
            .map(String::from),
    );
    let _ = config;
    Ok(outputs)
}

pub fn cmd_train(cfg_path: &Path) -> anyhow::Result<()> {
    let cfg: TrainCommandConfig = load_config(cfg_path)?;
    let (traj, _) = cfg.data.load()?;
    let model = resolve_model(cfg.model.clone(), traj.dim())?;
    let report = optimize::train(&model, &traj, cfg.horizon, &cfg.train.to_core())?;
    let mut outputs = write_train_outputs(&cfg.out_dir, &report, &model)?;
    outputs.sort();
    let resolved = TrainCommandConfig {
        model: model.clone(),
        ..cfg.clone()
    };
    let status = match report.stop_reason {
        optimize::StopReason::Divergence => "partial",
        _ => "ok",
    };
    let notes = vec![format!(
        "stop_reason={} steps={} best_val={:.6e} wall_seconds={:.3}",
        report.stop_reason, report.steps, report.best_val, report.wall_seconds
    )];
    write_manifest(&cfg.out_dir, "train", &resolved, &outputs, status, &notes)?;
    println!(
        "trained T={} for {} steps: best validation loss {:.6e} ({})",
        cfg.horizon, report.steps, report.best_val, report.stop_reason
    );
    Ok(())
}

// --------------------------------------------------------------- curriculum

pub fn cmd_curriculum(cfg_path: &Path) -> anyhow::Result<()> {
    let cfg: CurriculumCommandConfig = load_config(cfg_path)?;
    let (traj, _) = cfg.data.load()?;
    let model = resolve_model(cfg.model.clone(), traj.dim())?;
    let reports = optimize::curriculum_train(
        &model,
        &traj,
        cfg.t_max,
        cfg.total_budget,
        &cfg.train.to_core(),
    )?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = String::from("phase,T,steps,best_val,final_val,stop_reason\n");
    for (k, r) in reports.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{}\n",
            k,
            k + 1,
            r.steps,
            r.best_val,
            r.val_curve.last().copied().unwrap_or(f64::NAN),
            r.stop_reason
        ));
    }
    write_text(&cfg.out_dir.join("curriculum.csv"), &csv)?;
    let last = reports.last().expect("t_max >= 1 yields phases");
    last.final_params
        .write(&cfg.out_dir.join("model.bin"), &cfg.out_dir.join("model.json"))?;
    let resolved = CurriculumCommandConfig {
        model: model.clone(),
        ..cfg.clone()
    };
    write_manifest(
        &cfg.out_dir,
        "curriculum",
        &resolved,
        &["curriculum.csv".into(), "model.bin".into(), "model.json".into()],
        "ok",
        &[],
    )?;
    println!("curriculum of {} phases complete", reports.len());
    Ok(())
}

// -------------------------------------------------------------------- sweep

pub fn cmd_sweep(cfg_path: &Path) -> anyhow::Result<()> {
    let cfg: SweepCommandConfig = load_config(cfg_path)?;
    if cfg.grid.cell_count() == 0 {
        bail!("sweep grid has no cells");
    }
    // the sweep adds noise and normalizes per cell, so load raw
    let mut data = cfg.data.clone();
    data.normalize = false;
    data.noise_sigma = 0.0;
    let (raw, spec) = data.load()?;
    let system_name = spec
        .as_ref()
        .map(|s| s.kind.name().to_string())
        .unwrap_or_else(|| "external".into());
    let model = resolve_model(cfg.model.clone(), raw.dim())?;
    let cells = optimize::sweep(&model, &raw, &cfg.grid, &cfg.train.to_core(), &system_name);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = String::from(SweepCell::CSV_HEADER);
    csv.push('\n');
    let mut failures = 0;
    for cell in &cells {
        csv.push_str(&cell.csv_row());
        csv.push('\n');
        if cell.failed {
            failures += 1;
        }
    }
    write_text(&cfg.out_dir.join("sweep.csv"), &csv)?;
    let resolved = SweepCommandConfig {
        model: model.clone(),
        ..cfg.clone()
    };
    let status = if failures > 0 { "partial" } else { "ok" };
    let notes = vec![format!("{failures} of {} cells failed or diverged", cells.len())];
    write_manifest(
        &cfg.out_dir,
        "sweep",
        &resolved,
        &["sweep.csv".into()],
        status,
        &notes,
    )?;
    println!(
        "swept {} cells ({failures} failed); wrote {}",
        cells.len(),
        cfg.out_dir.join("sweep.csv").display()
    );
    Ok(())
}

// ----------------------------------------------------------------- schedule

pub fn cmd_schedule(cfg_path: &Path) -> anyhow::Result<()> {
    let cfg: ScheduleCommandConfig = load_config(cfg_path)?;
    let (traj, _) = cfg.data.load()?;
    let model = resolve_model(cfg.model.clone(), traj.dim())?;
    let (params, trace) =
        scheduler::run_scheduler(&model, &traj, &cfg.scheduler, &cfg.train.to_core())?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join("schedule_trace.csv"), &trace.to_csv_string())?;
    params.write(&cfg.out_dir.join("model.bin"), &cfg.out_dir.join("model.json"))?;
    let resolved = ScheduleCommandConfig {
        model: model.clone(),
        ..cfg.clone()
    };
    let notes = vec![format!("stop={:?} events={}", trace.stop, trace.events.len())];
    write_manifest(
        &cfg.out_dir,
        "schedule",
        &resolved,
        &[
            "schedule_trace.csv".into(),
            "model.bin".into(),
            "model.json".into(),
        ],
        "ok",
        &notes,
    )?;
    println!(
        "scheduler finished with {} events (stop: {:?})",
        trace.events.len(),
        trace.stop
    );
    Ok(())
}

// -------------------------------------------------------------------- probe

fn train_minimum(
    model: &MlpConfig,
    traj: &Trajectory,
    horizon: usize,
    train: &TrainSection,
    seed_shift: u64,
) -> anyhow::Result<(ParamVector, TrainReport)> {
    let mut tcfg = train.to_core();
    tcfg.seed = mix(tcfg.seed, seed_shift);
    let mut m = model.clone();
    m.seed = mix(m.seed, seed_shift);
    let report = optimize::train(&m, traj, horizon, &tcfg)?;
    Ok((report.final_params.clone(), report))
}

pub fn cmd_probe(cfg_path: &Path) -> anyhow::Result<()> {
    let cfg: ProbeCommandConfig = load_config(cfg_path)?;
    let (traj, spec) = cfg.data.load()?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    let need_model = || -> anyhow::Result<MlpConfig> {
        let m = cfg
            .model
            .clone()
            .ok_or_else(|| anyhow::anyhow!("this probe needs a `model` section"))?;
        resolve_model(m, traj.dim())
    };
    let need_train = || -> anyhow::Result<&TrainSection> {
        cfg.train
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("this probe needs a `train` section"))
    };

    let probe: LandscapeProbe = match &cfg.probe {
        ProbeParams::GradRatio {
            t_list,
            norm_mode,
            pretrain_horizon,
        } => {
            let model = need_model()?;
            let train = need_train()?;
            let (params, _) = train_minimum(&model, &traj, *pretrain_horizon, train, 0)?;
            landscape::gradient_ratio(&model, &params, &traj, t_list, *norm_mode)?
        }
        ProbeParams::Roughness {
            t_list,
            n_points,
            flat_tol,
            pairs,
        } => {
            let model = need_model()?;
            let train = need_train()?;
            let mut rows = Vec::new();
            for &t in t_list {
                for pair in 0..*pairs {
                    let (a, _) =
                        train_minimum(&model, &traj, t, train, 2 * pair as u64 + 1)?;
                    let (b, _) =
                        train_minimum(&model, &traj, t, train, 2 * pair as u64 + 2)?;
                    let lcfg = HorizonLossConfig::new(t);
                    let loss = |values: &[f64]| {
                        let p = ParamVector::from_values(&model, values.to_vec())?;
                        horizonlab_core::arloss::horizon_loss(&model, &p, &traj, &lcfg)
                    };
                    let z = landscape::segment_roughness(
                        loss,
                        a.values(),
                        b.values(),
                        *n_points,
                        *flat_tol,
                    )?;
                    rows.push(vec![t as f64, z as f64, *n_points as f64]);
                }
            }
            LandscapeProbe {
                kind: ProbeKind::Roughness,
                inputs: serde_json::to_value(&cfg.probe)?,
                columns: vec!["T".into(), "z".into(), "n_points".into()],
                rows,
                seed: cfg.train.as_ref().map(|t| t.seed).unwrap_or(0),
            }
        }
        ProbeParams::HessianRatio { t_list, gamma } => {
            let model = need_model()?;
            let train = need_train()?;
            let mut minima = BTreeMap::new();
            let mut all_t = t_list.clone();
            if !all_t.contains(&1) {
                all_t.push(1);
            }
            for &t in &all_t {
                let (params, _) = train_minimum(&model, &traj, t, train, t as u64)?;
                minima.insert(t, params);
            }
            let (train_windows, _) =
                optimize::split_windows(&traj, *t_list.iter().max().unwrap(), 0.2)?;
            landscape::hessian_ratio(
                &model,
                &traj,
                &minima,
                t_list,
                *gamma,
                Some(train_windows),
                train.seed,
            )?
        }
        ProbeParams::GenRatio {
            t_low,
            t_high_list,
            seeds,
            delta_pair,
        } => {
            let model = need_model()?;
            let train = need_train()?;
            let mut rows = Vec::new();
            for &t_high in t_high_list {
                for s in 0..*seeds {
                    let mut tcfg = train.to_core();
                    tcfg.seed = mix(tcfg.seed, s as u64);
                    let mut m = model.clone();
                    m.seed = mix(m.seed, s as u64);
                    match landscape::paired_minima(&m, &traj, *t_low, t_high, &tcfg, *delta_pair)
                    {
                        Ok((theta_l, theta_h)) => {
                            let (_, val) = optimize::split_windows(&traj, t_high, 0.2)?;
                            match landscape::generalization_ratio(
                                &m, &traj, &theta_l, &theta_h, *t_low, t_high,
                                Some(val),
                            ) {
                                Ok(r) => rows.push(vec![
                                    *t_low as f64,
                                    t_high as f64,
                                    r,
                                    s as f64,
                                ]),
                                Err(horizonlab_core::Error::IndeterminateRatio { .. }) => {}
                                Err(other) => return Err(other.into()),
                            }
                        }
                        Err(horizonlab_core::Error::BasinMismatch { .. }) => {}
                        Err(other) => return Err(other.into()),
                    }
                }
            }
            LandscapeProbe {
                kind: ProbeKind::GenRatio,
                inputs: serde_json::to_value(&cfg.probe)?,
                columns: vec!["T_l".into(), "T_h".into(), "r".into(), "seed".into()],
                rows,
                seed: train.seed,
            }
        }
        ProbeParams::Scan {
            dims,
            ranges,
            n_per_dim,
            normalize,
            horizon,
            method,
        } => {
            let spec = spec
                .clone()
                .ok_or_else(|| anyhow::anyhow!("scans need system data, not csv"))?;
            if cfg.data.normalize {
                bail!("mechanistic scans need raw data: set data.normalize = false");
            }
            let center = spec.params.clone();
            let loss = |theta: &[f64]| {
                horizonlab_core::arloss::mechanistic_loss(&spec, theta, &traj, *horizon, *method)
            };
            landscape::param_scan(loss, &center, dims, ranges, *n_per_dim, *normalize)?
        }
        ProbeParams::EpsCheck {
            epsilon,
            n_directions,
            n_states,
            checkpoint,
        } => {
            let spec = spec
                .clone()
                .ok_or_else(|| anyhow::anyhow!("the ε-check needs system data"))?;
            if cfg.data.normalize {
                bail!("the ε-check compares raw coordinates: set data.normalize = false");
            }
            let model = need_model()?;
            let params = match checkpoint {
                Some(path) => ParamVector::read(&model, path)?,
                None => net::init(&model),
            };
            let stride = (traj.len() / n_states.max(&1)).max(1);
            let states: Vec<Vec<f64>> = (0..*n_states)
                .map(|i| traj.row((i * stride).min(traj.len() - 1)).to_vec())
                .collect();
            let check = landscape::epsilon_region_check(
                &model,
                &params,
                &spec,
                traj.dt,
                &states,
                *epsilon,
                *n_directions,
                cfg.data.seed,
            )?;
            LandscapeProbe {
                kind: ProbeKind::EpsCheck,
                inputs: serde_json::to_value(&cfg.probe)?,
                columns: vec!["epsilon".into(), "max_deviation".into(), "pass".into()],
                rows: vec![vec![
                    *epsilon,
                    check.max_deviation,
                    if check.pass { 1.0 } else { 0.0 },
                ]],
                seed: cfg.data.seed,
            }
        }
    };

    let file = format!("{}.csv", probe.kind.name());
    write_text(&cfg.out_dir.join(&file), &probe.to_csv_string())?;
    write_manifest(&cfg.out_dir, "probe", &cfg, &[file.clone()], "ok", &[])?;
    println!("wrote {}", cfg.out_dir.join(&file).display());
    Ok(())
}
