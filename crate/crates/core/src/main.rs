fn main() {
    std::process::exit(uhyper::cli_runner::run(std::env::args_os()));
}
