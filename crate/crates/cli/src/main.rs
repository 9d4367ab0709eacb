fn main() {
    std::process::exit(prooflens::run_cli(std::env::args_os()));
}
