fn main() {
    std::process::exit(sarad::cli::run());
}
