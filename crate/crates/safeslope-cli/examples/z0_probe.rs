//! Scratch probe: acceptance-relevant statistics across z0 candidates.

use safeslope_cli::config::ExperimentConfig;
use safeslope_cli::experiment::run_experiment;

fn pearson_safe(cfg: &ExperimentConfig) -> (usize, f64) {
    let truth = safeslope_cli::experiment::ground_truth(cfg).unwrap();
    let pairs: Vec<(f64, f64)> = truth
        .f
        .iter()
        .zip(&truth.f_low)
        .filter(|(a, b)| **a <= 0.0 && **b <= 0.0)
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        cov += (a - ma) * (b - mb);
        va += (a - ma).powi(2);
        vb += (b - mb).powi(2);
    }
    let safe = truth.f.iter().filter(|v| **v <= 0.0).count();
    (safe, cov / (va.sqrt() * vb.sqrt()))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let z0 = args.get(1).map(|s| s.as_str()).unwrap_or("0.1,-0.1");
    let seed = args.get(2).map(|s| s.as_str()).unwrap_or("1729");

    let mut base = ExperimentConfig::default();
    base.set("z0", z0).unwrap();
    if let Some(l) = std::env::args().nth(3) { base.set("error_kernel_lengthscales", &l).unwrap(); }
    let (safe, pearson) = pearson_safe(&base);
    println!("z0 = {z0}, seed = {seed}: safe_points = {safe}, pearson_safe = {pearson:.4}");

    let mut results = Vec::new();
    for (alg, fid) in [
        ("safeslope", "multi"),
        ("safeslope", "single"),
        ("safeucb", "multi"),
        ("safeucb", "single"),
    ] {
        let mut cfg = base.clone();
        cfg.set("algorithm", alg).unwrap();
        cfg.set("fidelity", fid).unwrap();
        cfg.set("seed", seed).unwrap();
        let result = run_experiment(&cfg).unwrap();
        let agg = &result.aggregate;
        let regret = agg.regret_mean[149];
        let unsafe_mean = agg.unsafe_mean[149];
        let early = agg.regret_mean[24] / 25.0;
        let late = (agg.regret_mean[149] - agg.regret_mean[49]) / 100.0;
        let per_trial_late: Vec<String> = result
            .regret_curves
            .iter()
            .map(|c| format!("{:.2}", (c[149] - c[49]) / 100.0))
            .collect();
        println!(
            "  {alg:>9} {fid:>6}: regret = {regret:8.2}  unsafe = {unsafe_mean:5.2}  ratio = {:6.4}  late/trial = [{}]",
            late / early,
            per_trial_late.join(" ")
        );
        results.push((alg, fid, regret, unsafe_mean, late / early));
    }
    let get = |a: &str, f: &str| results.iter().find(|r| r.0 == a && r.1 == f).unwrap().clone();
    let ss_mf = get("safeslope", "multi");
    let ss_sf = get("safeslope", "single");
    let ucb_mf = get("safeucb", "multi");
    let ucb_sf = get("safeucb", "single");
    println!(
        "  crit7: mf<=sf {} ; mf smallest {} | crit8: plateau {} ; slope<ucb(mf) {} ; slope<ucb(sf) {}",
        ss_mf.3 <= ss_sf.3,
        ss_mf.3 <= ss_sf.3.min(ucb_mf.3).min(ucb_sf.3),
        ss_mf.4 <= 0.1,
        ss_mf.2 < ucb_mf.2,
        ss_sf.2 < ucb_sf.2,
    );
}
