fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FUSION_TRACK_LOG", "warn"))
        .init();
    std::process::exit(fusion_track::cli::main_with_args(std::env::args_os()));
}
