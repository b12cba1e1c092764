fn main() {
    std::process::exit(pdmp_core::cli::main());
}
