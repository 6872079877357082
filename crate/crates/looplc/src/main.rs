use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    let code = looplc::cli::main_with(std::env::args_os(), &mut stdout, &mut std::io::stderr());
    let _ = stdout.flush();
    ExitCode::from(code)
}
