fn main() {
    std::process::exit(clifford_ym::cli::run(std::env::args_os()));
}
