use env_logger::{Env, Target};

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("VFED_LOG", "error"))
        .target(Target::Stderr)
        .init();
    std::process::exit(vfedpca::runner::main_with_args(std::env::args_os()));
}
