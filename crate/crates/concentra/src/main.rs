fn main() {
    std::process::exit(concentra::run_command(std::env::args_os()));
}
