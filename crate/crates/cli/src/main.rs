fn main() { std::process::exit(greedy_ldp_cli::run(std::env::args_os())); }
