fn main() {
    std::process::exit(sphbeam_cli::run_cli(std::env::args_os()));
}
