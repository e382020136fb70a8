use std::process::ExitCode;

fn main() -> ExitCode {
    let code = bosefunc_cli::run_args(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr());
    ExitCode::from(code)
}
