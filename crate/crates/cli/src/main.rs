fn main() {
    std::process::exit(nlsysid_cli::run(std::env::args_os()));
}
