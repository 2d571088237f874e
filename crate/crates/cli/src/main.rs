use std::process::ExitCode;
use std::time::Instant;

use featsel::pipeline::{self, ConfigError, Invocation};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let invocation = match pipeline::parse_config(std::env::args_os()) {
        Ok(inv) => inv,
        Err(ConfigError::Help(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(ConfigError::Usage(text)) => {
            eprint!("{text}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    match run(invocation) {
        Ok(()) => {
            log::info!("finished in {:.2?}", started.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(invocation: Invocation) -> featsel::Result<()> {
    let (report, out) = match invocation {
        Invocation::Synth(s) => {
            let ds = featsel::dataset::synthetic_gaussian(&s.spec)?;
            ds.save_csv(&s.out, &s.label_name)?;
            eprintln!("wrote {} ({} rows, {} features)", s.out.display(), ds.n_obs(), ds.n_features());
            return Ok(());
        }
        Invocation::Filter(cfg) => (pipeline::run_filter_experiment(&cfg)?, cfg.out_dir),
        Invocation::Wrapper(cfg) => (pipeline::run_wrapper_experiment(&cfg)?, cfg.out_dir),
    };
    pipeline::emit_report(&report, &out)?;
    eprintln!(
        "{}: {} features selected, test MCE {:.4}; reports in {} ({:.2?})",
        report.experiment,
        report.selected_features.len(),
        report.final_test_mce,
        out.display(),
        report.elapsed
    );
    Ok(())
}
