//! Calibration playground for acceptance settings (not part of the deliverable tests).
use horizonlab_core::arloss::NormMode;
use horizonlab_core::dataset::{build_dataset, DatasetConfig};
use horizonlab_core::dynamics::SystemSpec;
use horizonlab_core::landscape::{fit_growth, gradient_ratio};
use horizonlab_core::net::{Activation, MlpConfig};
use horizonlab_core::optimize::{train, Budget, TrainConfig};
use horizonlab_core::rng::mix;

fn g_curve(system: &str, dt: f64, samples: usize, t_list: &[usize], epochs: usize, eta: f64, seed: u64, mode: NormMode) -> (Vec<f64>, Vec<f64>) {
    let spec = match system {
        "lorenz" => SystemSpec::lorenz(),
        "dp" => SystemSpec::double_pendulum(),
        "lc" => SystemSpec::limit_cycle().with_hopf_normal_form(true),
        _ => unreachable!(),
    };
    let traj = build_dataset(&spec, &DatasetConfig::new(samples, seed).with_dt(dt)).unwrap();
    let model = MlpConfig::new(traj.dim(), 6, 2)
        .with_activation(Activation::Softplus { beta: 8.0 })
        .with_seed(mix(seed, 1));
    let tcfg = TrainConfig::new(eta, Budget::Epochs(epochs))
        .with_seed(mix(seed, 2))
        .with_batch_size(128);
    let report = train(&model, &traj, 1, &tcfg).unwrap();
    let probe = gradient_ratio(&model, &report.final_params, &traj, t_list, mode).unwrap();
    let ts: Vec<f64> = probe.rows.iter().map(|r| r[0] * dt).collect();
    let gs: Vec<f64> = probe.rows.iter().map(|r| r[1]).collect();
    (ts, gs)
}

fn g_fit(system: &str, dt: f64, samples: usize, t_list: &[usize], epochs: usize, eta: f64, seed: u64, mode: NormMode) {
    let spec = match system {
        "lorenz" => SystemSpec::lorenz(),
        "dp" => SystemSpec::double_pendulum(),
        "lc" => SystemSpec::limit_cycle().with_hopf_normal_form(true),
        _ => unreachable!(),
    };
    let traj = build_dataset(&spec, &DatasetConfig::new(samples, seed).with_dt(dt)).unwrap();
    let model = MlpConfig::new(traj.dim(), 6, 2)
        .with_activation(Activation::Softplus { beta: 8.0 })
        .with_seed(mix(seed, 1));
    let tcfg = TrainConfig::new(eta, Budget::Epochs(epochs))
        .with_seed(mix(seed, 2))
        .with_batch_size(128);
    let report = train(&model, &traj, 1, &tcfg).unwrap();
    let probe = gradient_ratio(&model, &report.final_params, &traj, t_list, mode).unwrap();
    let ts: Vec<f64> = probe.rows.iter().map(|r| r[0] * dt).collect();
    let gs: Vec<f64> = probe.rows.iter().map(|r| r[1]).collect();
    let f = fit_growth(&ts, &gs).unwrap();
    println!("{system} seed={seed}: g={:?}", gs.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>());
    println!("   exp_r2={:.4} lin_r2={:.4} rate={:.3} slope={:.3} aic(exp-lin)={:.2}",
        f.exp_r2, f.lin_r2, f.exp_rate, f.lin_slope, f.aic_exp_minus_lin);
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("g");
    match what {
        "g" => {
            let mode = match args.get(2).map(|s| s.as_str()) {
                Some("euclid") => NormMode::Euclidean,
                _ => NormMode::Squared,
            };
            let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(150);
            println!("== lorenz");
            for seed in 0..5 {
                g_fit("lorenz", 0.04, 600, &[1, 5, 10, 15, 20, 25, 30, 40, 50], epochs, 2e-3, seed, mode);
            }
            println!("== dp");
            for seed in 0..5 {
                g_fit("dp", 0.005, 2000, &[1, 5, 10, 15, 20, 25, 30], epochs, 2e-3, seed, mode);
            }
            println!("== lc");
            for seed in 0..5 {
                g_fit("lc", 0.5, 400, &[1, 3, 6, 9, 12, 15, 18, 21, 24], epochs, 2e-3, seed, mode);
            }
        }
        "gsweep" => {
            let windows: Vec<(&str, f64, usize, Vec<usize>)> = vec![
                ("lorenz", 0.04, 600, vec![1, 3, 6, 9, 12, 15, 18]),
                ("dp", 0.005, 2000, vec![1, 5, 10, 15, 20, 25, 30]),
                ("lc", 0.5, 400, vec![1, 3, 6, 9, 12, 15, 18, 21, 24]),
            ];
            for &epochs in &[30usize, 60, 100, 200] {
                for mode in [NormMode::Squared, NormMode::Euclidean] {
                    let mode_name = match mode { NormMode::Squared => "sq", NormMode::Euclidean => "eu" };
                    for (sys, dt, samples, t_list) in &windows {
                        let mut exp_wins = 0;
                        let mut pos_slope = 0;
                        let mut lin_aic = 0;
                        for seed in 0..5u64 {
                            let (ts, gs) = g_curve(sys, *dt, *samples, t_list, epochs, 2e-3, seed, mode);
                            if let Ok(f) = fit_growth(&ts, &gs) {
                                if f.exp_r2 > f.lin_r2 && f.exp_rate > 0.0 { exp_wins += 1; }
                                if f.lin_slope > 0.0 { pos_slope += 1; }
                                if f.aic_exp_minus_lin > 0.0 { lin_aic += 1; }
                            }
                        }
                        println!("epochs={epochs} mode={mode_name} {sys}: exp_wins={exp_wins}/5 slope+={pos_slope}/5 lin_aic={lin_aic}/5");
                    }
                }
            }
        }
        _ => eprintln!("unknown calibration '{what}'"),
    }
}
