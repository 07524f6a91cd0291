fn main() {
    std::process::exit(gravdecay::cli::main());
}
