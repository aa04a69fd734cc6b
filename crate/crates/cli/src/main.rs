fn main() {
    std::process::exit(moe_ram_cli::run(std::env::args_os()));
}
