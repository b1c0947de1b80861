fn main() {
    std::process::exit(skorohod::cli::run_from_env());
}
