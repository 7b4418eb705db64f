fn main() {
    std::process::exit(amdg::cli::run());
}
