fn main() {
    std::process::exit(lac::cli::main());
}
