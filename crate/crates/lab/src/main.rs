fn main() {
    std::process::exit(lagcov_lab::cli::run(std::env::args_os()));
}
