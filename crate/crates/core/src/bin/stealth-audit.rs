fn main() {
    std::process::exit(stealth_audit::cli::run(std::env::args_os()));
}
