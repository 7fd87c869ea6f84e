fn main() {
    env_logger::init();
    std::process::exit(whisperline::cli::run(std::env::args_os()));
}
