fn main() {
    std::process::exit(gilbert_hsd::cli::run_cli(std::env::args_os()));
}
