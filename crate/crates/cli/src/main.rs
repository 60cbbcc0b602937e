fn main() {
    std::process::exit(relusat_cli::run(std::env::args()));
}
