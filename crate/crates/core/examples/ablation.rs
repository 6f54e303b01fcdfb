//! Hit@1 of the three semantic views on the default synthetic split.
//!
//! Usage: `cargo run --example ablation -- [seeds] [key=value ...]`

use ams_sfe::pipeline::{run_ablation, PipelineConfig};
use ams_sfe::synthetic::{generate_synthetic, SyntheticSpec};

fn main() -> ams_sfe::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut config = PipelineConfig::default();
    let mut spec = SyntheticSpec::default();
    for kv in args {
        let (k, v) = kv.split_once('=').expect("key=value");
        match k {
            "noise" => spec.noise_sigma = v.parse().unwrap(),
            "latent" => spec.latent_dim = v.parse().unwrap(),
            "pratio" => spec.prototype_noise_ratio = v.parse().unwrap(),
            _ => config.set(k, v)?,
        }
    }
    let mut sums = [0.0; 3];
    for seed in 0..seeds {
        let (seen, unseen) = generate_synthetic(&SyntheticSpec { seed, ..spec.clone() })?;
        let outcomes = run_ablation(&PipelineConfig { seed, ..config.clone() }, &seen, &unseen)?;
        let hits: Vec<f64> = outcomes.iter().map(|o| o.report.hit_at(1)).collect();
        println!("seed {seed}: P {:.3}  E {:.3}  P+E {:.3}", hits[0], hits[1], hits[2]);
        sums.iter_mut().zip(&hits).for_each(|(s, h)| *s += h);
    }
    let n = seeds as f64;
    println!("mean:   P {:.3}  E {:.3}  P+E {:.3}", sums[0] / n, sums[1] / n, sums[2] / n);
    Ok(())
}
