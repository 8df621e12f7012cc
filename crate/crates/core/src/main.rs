fn main() {
    std::process::exit(aftmean::cli::run_from(std::env::args_os()));
}
