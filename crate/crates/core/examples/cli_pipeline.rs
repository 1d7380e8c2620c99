//! The command-line pipeline driven in-process: gen-synth, train, score,
//! then every evaluation. Equivalent shell commands are printed as they run.

use clap::Parser;
use simvec_metric::cli::{run, Cli};

fn main() -> simvec_metric::Result<()> {
    let dir = std::env::temp_dir().join("simvec-example-pipeline");
    let d = |name: &str| dir.join(name).display().to_string();
    let (data, cache, ckpt) = (d("data"), d("data/embeddings.svec"), d("model.svtm"));
    let steps: Vec<Vec<String>> = vec![
        vec!["gen-synth", "--count", "600", "--seed", "3", "--out", &data],
        vec![
            "train",
            "--dataset",
            &d("data/dataset.jsonl"),
            "--cache",
            &cache,
            "--checkpoint",
            &ckpt,
            "--lr",
            "1e-3",
            "--epochs",
            "4",
            "--seed",
            "3",
        ],
        vec![
            "score",
            "--checkpoint",
            &ckpt,
            "--dataset",
            &d("data/dataset.jsonl"),
            "--cache",
            &cache,
            "--out",
            &d("scores.jsonl"),
        ],
        vec![
            "eval-corr",
            "--checkpoint",
            &ckpt,
            "--dataset",
            &d("data/dataset.jsonl"),
            "--cache",
            &cache,
        ],
        vec![
            "eval-foil",
            "--checkpoint",
            &ckpt,
            "--dataset",
            &d("data/foil.jsonl"),
            "--cache",
            &cache,
            "--out",
            &d("foil.json"),
        ],
        vec![
            "eval-pascal",
            "--checkpoint",
            &ckpt,
            "--dataset",
            &d("data/pascal.jsonl"),
            "--cache",
            &cache,
        ],
        vec![
            "bench",
            "--checkpoint",
            &ckpt,
            "--dataset",
            &d("data/dataset.jsonl"),
            "--cache",
            &cache,
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();

    for args in steps {
        println!("$ simvec {}", args.join(" "));
        let cli = Cli::try_parse_from(std::iter::once("simvec".to_string()).chain(args)).expect("valid arguments");
        print!("{}", run(&cli)?);
        println!();
    }
    Ok(())
}
