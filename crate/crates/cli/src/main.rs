fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let status = agroyield_cli::run(std::env::args_os());
    std::process::exit(status.code());
}
