use std::io::Write;
use std::process::ExitCode;

use lcanet_cli::{exit_code, parse_args, run, ArgsError, USAGE_EXIT};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let spec = match parse_args(std::env::args_os()) {
        Ok(spec) => spec,
        Err(ArgsError::Usage(e)) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_EXIT)
            } else {
                ExitCode::SUCCESS
            };
        }
        Err(ArgsError::Invalid(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };

    print!("# resolved configuration\n{}\n", spec.echo());
    let _ = std::io::stdout().flush();
    match run(&spec) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
