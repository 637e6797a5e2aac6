fn main() {
    std::process::exit(ifs::cli::main());
}
