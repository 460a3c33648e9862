fn main() {
    std::process::exit(flowpix::cli::run(std::env::args_os()));
}
