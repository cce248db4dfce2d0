fn main() {
    std::process::exit(vesselpose_cli::run());
}
