fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRACTEL_LOG", "warn")).init();
    std::process::exit(fractel::cli::run(std::env::args_os()));
}
