fn main() {
    std::process::exit(ridgepen::cli::main());
}
