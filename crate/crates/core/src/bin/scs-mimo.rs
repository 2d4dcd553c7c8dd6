fn main() {
    std::process::exit(scs_mimo::cli::main());
}
