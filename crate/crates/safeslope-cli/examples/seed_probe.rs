//! Scratch probe: MF SafeSlope plateau ratio across master seeds.

use safeslope_cli::config::ExperimentConfig;
use safeslope_cli::experiment::run_experiment;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let z0 = args.get(1).map(|s| s.as_str()).unwrap_or("0.05,-0.1");
    let lo: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let hi: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(16);
    let mut passes = 0;
    let mut total = 0;
    for seed in lo..=hi {
        let mut cfg = ExperimentConfig::default();
        cfg.set("z0", z0).unwrap();
        cfg.set("algorithm", "safeslope").unwrap();
        cfg.set("fidelity", "multi").unwrap();
        cfg.set("seed", &seed.to_string()).unwrap();
        if let Some(v) = std::env::args().nth(4) { cfg.set("error_kernel_variance", &v).unwrap(); }
        if let Some(v) = std::env::args().nth(5) { cfg.set("low_kernel_variance", &v).unwrap(); }
        let result = run_experiment(&cfg).unwrap();
        let agg = &result.aggregate;
        let early = agg.regret_mean[24] / 25.0;
        let late = (agg.regret_mean[149] - agg.regret_mean[49]) / 100.0;
        let ratio = late / early;
        let bad_trials = result
            .regret_curves
            .iter()
            .filter(|c| (c[149] - c[49]) / 100.0 > 0.25)
            .count();
        total += 1;
        if ratio <= 0.1 {
            passes += 1;
        }
        println!(
            "seed {seed:>9}: ratio = {ratio:6.4} {}  bad_trials = {bad_trials}",
            if ratio <= 0.1 { "PASS" } else { "FAIL" }
        );
    }
    println!("pass rate: {passes}/{total}");
}
