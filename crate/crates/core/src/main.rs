use clap::Parser;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = metagov::app::Cli::parse();
    let stdout = std::io::stdout();
    match metagov::app::run(cli, &mut stdout.lock()) {
        Err(e) if e.is_broken_pipe() => Ok(()),
        result => Ok(result?),
    }
}
