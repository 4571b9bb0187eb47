fn main() {
    std::process::exit(cohortfair_cli::run(std::env::args_os()));
}
