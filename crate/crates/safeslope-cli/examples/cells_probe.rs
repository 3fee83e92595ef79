//! Scratch probe: run the four algorithm x fidelity cells at paper scale and
//! report the acceptance-relevant statistics (not part of the build).

use std::time::Instant;

use safeslope_cli::config::ExperimentConfig;
use safeslope_cli::experiment::run_experiment;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let err_var = args.get(1).map(|s| s.as_str()).unwrap_or("1.0");
    let seed = args.get(2).map(|s| s.as_str()).unwrap_or("1729");
    let lengthscale = args.get(3).map(|s| s.as_str()).unwrap_or("1.0");
    println!("error_kernel_variance = {err_var}, seed = {seed}, lengthscale = {lengthscale}");
    let start = Instant::now();
    let mut summary = Vec::new();
    for (alg, fid) in [
        ("safeslope", "multi"),
        ("safeslope", "single"),
        ("safeucb", "multi"),
        ("safeucb", "single"),
    ] {
        let mut cfg = ExperimentConfig::default();
        cfg.set("algorithm", alg).unwrap();
        cfg.set("fidelity", fid).unwrap();
        cfg.set("error_kernel_variance", err_var).unwrap();
        cfg.set("seed", seed).unwrap();
        cfg.set("kernel_lengthscales", lengthscale).unwrap();
        cfg.set("low_kernel_lengthscales", lengthscale).unwrap();
        cfg.set("error_kernel_lengthscales", lengthscale).unwrap();
        let cell_start = Instant::now();
        let result = run_experiment(&cfg).unwrap();
        let agg = &result.aggregate;
        let last = agg.iterations as usize - 1;
        let regret = agg.regret_mean[last];
        let unsafe_mean = agg.unsafe_mean[last];
        // plateau ratio for the regret curve
        let early: f64 = agg.regret_mean[24] / 25.0; // mean increment over 1..=25
        let late: f64 = (agg.regret_mean[149] - agg.regret_mean[49]) / 100.0; // 50..150
        let stops: Vec<String> = result.records.iter().map(|r| r.stop.label()).collect();
        println!(
            "{alg:>9} {fid:>6}: regret_T150 = {regret:9.3}  unsafe_T150 = {unsafe_mean:6.2}  early_inc = {early:8.4}  late_inc = {late:8.4}  ratio = {:6.4}  [{}]  ({:.1?})",
            late / early,
            stops.join(","),
            cell_start.elapsed()
        );
        summary.push((alg, fid, regret, unsafe_mean, late / early));
    }
    println!("total elapsed: {:?}", start.elapsed());
}
