fn main() {
    std::process::exit(e2gc_core::cli::run(std::env::args_os()));
}
