fn main() -> std::process::ExitCode {
    feedpath_service::cli::main()
}
