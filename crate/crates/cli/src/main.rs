fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    if let Err(f) = melevy_cli::configure_threads() {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
    std::process::exit(melevy_cli::main_with_args(std::env::args_os()));
}
