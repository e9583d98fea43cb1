fn main() -> std::process::ExitCode {
    cvrecon::cli::run_from(std::env::args_os())
}
