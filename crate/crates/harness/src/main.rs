fn main() {
    std::process::exit(precgd_harness::cli::run_cli(std::env::args_os()));
}
