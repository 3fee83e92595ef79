//! Scratch probe: per-iteration trace of one MF SafeSlope trial.

use safeslope::analysis::cumulative_regret;
use safeslope::search::RunOptions;
use safeslope_cli::config::ExperimentConfig;
use safeslope_cli::experiment::run_experiment_with;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let err_var = args.get(1).map(|s| s.as_str()).unwrap_or("1.0");
    let lengthscale = args.get(2).map(|s| s.as_str()).unwrap_or("1.0");
    let mut cfg = ExperimentConfig::default();
    cfg.set("algorithm", "safeslope").unwrap();
    cfg.set("fidelity", "multi").unwrap();
    cfg.set("error_kernel_variance", err_var).unwrap();
    cfg.set("kernel_lengthscales", lengthscale).unwrap();
    cfg.set("low_kernel_lengthscales", lengthscale).unwrap();
    cfg.set("error_kernel_lengthscales", lengthscale).unwrap();
    cfg.set("trials", "1").unwrap();
    let result = run_experiment_with(
        &cfg,
        RunOptions { log_widths: true, ..RunOptions::default() },
    )
    .unwrap();
    let record = &result.records[0];
    let widths = record.width_history.as_ref().unwrap();
    let regret = cumulative_regret(record, result.truth.f_star);
    println!("f_star = {:.4}, argmin = {}", result.truth.f_star, result.truth.argmin_index);
    println!("  t  point  gap      width   |S_t|  cumregret");
    for (i, row) in record.rows.iter().enumerate() {
        if i % 5 == 0 || i + 12 >= record.rows.len() {
            println!(
                "{:3}  {:5}  {:7.3}  {:6.3}  {:5}  {:8.2}",
                row.t,
                row.point,
                row.f_true - result.truth.f_star,
                widths[i],
                row.safe_set_size,
                regret[i]
            );
        }
    }
}
