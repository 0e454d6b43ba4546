fn main() {
    std::process::exit(simrf::cli::run(std::env::args_os()));
}
