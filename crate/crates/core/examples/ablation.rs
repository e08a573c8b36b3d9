//! Runs every mode over a few seeds and prints final target metrics.
//!
//! `cargo run --release -p adcluster --example ablation -- [n_seeds]`

use std::time::Instant;

use adcluster::pipeline::{adapt_stage, pretrain_stage};
use adcluster::{ExperimentConfig, Mode};

fn main() -> adcluster::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let base = ExperimentConfig::default();
    for seed in 0..n_seeds {
        let cfg = base.with_seed(seed);
        let t = Instant::now();
        let pre = pretrain_stage::<f64>(&cfg)?;
        print!("seed {seed}: direct mAP {:.3} J {:.3}", pre.direct.metrics.map, pre.direct.j);
        for mode in Mode::ALL {
            let out = adapt_stage(&pre, &cfg, mode)?;
            let first = &out.history[0];
            let last = out.history.last().unwrap();
            print!(
                " | {mode} mAP {:.3} J {:.3} f {:.2}->{:.2} k {}",
                out.last.metrics.map, out.last.j, first.pseudo_fscore, last.pseudo_fscore, last.n_clusters
            );
        }
        println!(" ({:.1}s)", t.elapsed().as_secs_f64());
    }
    Ok(())
}
