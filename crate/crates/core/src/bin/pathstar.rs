fn main() {
    std::process::exit(pathstar::cli::main());
}
