use std::process::ExitCode;

fn main() -> ExitCode {
    euler_abelian::cli::run_main()
}
