fn main() {
    std::process::exit(farmopt_cli::run(std::env::args_os()));
}
