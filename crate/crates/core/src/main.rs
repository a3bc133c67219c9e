use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 2 {
        eprintln!("usage: plate-vi <config.json>");
        std::process::exit(2);
    }

    if let Ok(value) = std::env::var("PLATE_VI_THREADS") {
        match value.parse::<usize>() {
            Ok(threads) if threads > 0 => {
                // Build the global worker pool before any parallel region
                // spawns the default one.
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                {
                    eprintln!("error: could not configure {threads} worker threads: {e}");
                    std::process::exit(2);
                }
            }
            _ => {
                eprintln!("error: PLATE_VI_THREADS must be a positive integer, got '{value}'");
                std::process::exit(2);
            }
        }
    }

    if let Err(e) = plate_vi::cli::run(Path::new(&args[1])) {
        eprintln!("error: {e}");
        std::process::exit(plate_vi::cli::exit_code(&e));
    }
}
