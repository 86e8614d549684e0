fn main() {
    std::process::exit(lmgf::cli::run(std::env::args_os()));
}
