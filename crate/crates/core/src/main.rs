fn main() -> std::process::ExitCode {
    affordnav::cli::main()
}
