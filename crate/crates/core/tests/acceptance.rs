//! The thirteen acceptance criteria, one pass/fail line each. Runs without
//! the libtest harness so the lines are printed on every run.

use std::process::ExitCode;
use std::time::Instant;

use oscprobe::validate::{self, Check, Fig4Params};

const SEED: u64 = 20_240_601;

fn report(run: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let c = run();
    println!("{c}  ({:.1} s)", start.elapsed().as_secs_f64());
    c
}

fn main() -> ExitCode {
    let p = Fig4Params::default();
    let checks = vec![
        report(|| validate::det_m_onset(&p)),
        report(|| validate::pulse_amplitude(&p)),
        report(|| validate::boundary_damping(&p)),
        report(|| validate::noise_asymptote(&p)),
        report(|| validate::horizon(&p)),
        report(|| validate::round_trip(SEED)),
        report(|| validate::schrodinger_oracle(SEED)),
        report(|| validate::lindblad_oracle(SEED)),
        report(validate::chain_cross_check),
        report(|| validate::noise_monte_carlo(SEED)),
        report(|| validate::shot_coverage(SEED)),
        report(|| validate::temperature_recovery(&p)),
        report(validate::bochner_catalog),
    ];
    let failed: Vec<usize> = checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    println!("{} of {} criteria passed", checks.len() - failed.len(), checks.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
