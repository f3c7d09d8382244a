fn main() {
    std::process::exit(dpfdr::cli::run(std::env::args_os()));
}
