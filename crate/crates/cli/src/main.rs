fn main() {
    std::process::exit(pkrr_cli::run_cli(std::env::args_os()));
}
