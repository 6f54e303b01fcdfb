//! Acceptance checks. One PASS/FAIL line per criterion; exits non-zero if any fail.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ams_sfe::autoencoder::{
    backward, decode_checkpoint, encode_checkpoint, total_loss, AlignmentTargets, AutoencoderModel, Objective,
};
use ams_sfe::io::{decode_matrix_binary, encode_matrix_binary, read_matrix, write_matrix_binary, write_matrix_csv};
use ams_sfe::manifold::{double_center, embed, DistanceMatrix, EmbeddedManifold};
use ams_sfe::numerics::{DenseMatrix, Rng};
use ams_sfe::pipeline::{run_ablation, PipelineConfig};
use ams_sfe::prototypes::solve_combination;
use ams_sfe::synthetic::{generate_synthetic, SyntheticSpec};
use ams_sfe::{ClassId, EvaluationReport};

const MDS_RELATIVE_TOL: f64 = 1e-6;
const MDS_TIME_LIMIT: Duration = Duration::from_secs(5);
const CENTERING_TOL: f64 = 1e-8;
const GRAD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
/// Denominator floor for the relative gradient error.
const GRAD_FLOOR: f64 = 1e-3;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(30);
const INDICATOR_TOL: f64 = 1e-10;
const ABLATION_SEEDS: u64 = 5;
const ABLATION_TIME_LIMIT: Duration = Duration::from_secs(120);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn naive_distances(p: &DenseMatrix) -> DenseMatrix {
    let m = p.rows();
    DenseMatrix::from_fn(m, m, |i, j| {
        p.row(i).iter().zip(p.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

fn mds_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(0xA11CE);
    let mut worst: f64 = 0.0;
    for set in 0..50 {
        let m = 3 + rng.index(28);
        let intrinsic = 1 + rng.index((m - 1).min(10));
        let ambient = intrinsic + rng.index(5);
        let latent = DenseMatrix::from_fn(m, intrinsic, |_, _| rng.uniform(-5.0, 5.0));
        let lift = DenseMatrix::from_fn(intrinsic, ambient, |_, _| rng.standard_normal());
        let points = latent.matmul(&lift).unwrap();
        let d = naive_distances(&points);
        let target = intrinsic + rng.index(4);
        let e = embed(
            &double_center(&DistanceMatrix { d: d.clone() }),
            target,
            (0..m as u32).map(ClassId).collect(),
        )
        .map_err(|e| format!("set {set}: {e}"))?;
        let rec = naive_distances(&e.columns());
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    worst = worst.max((rec[(i, j)] - d[(i, j)]).abs() / d[(i, j)]);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= MDS_RELATIVE_TOL, || format!("max relative distance error {worst:e}"))?;
    ensure(elapsed < MDS_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("50 sets, max relative error {worst:.2e}, {elapsed:.2?}"))
}

fn double_centering() -> Outcome {
    let mut rng = Rng::new(0xB0B);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = 2 + rng.index(29);
        let dim = 1 + rng.index(8);
        let p = DenseMatrix::from_fn(m, dim, |_, _| rng.uniform(-1.0, 1.0));
        let d = naive_distances(&p);
        let b = double_center(&DistanceMatrix { d: d.clone() });
        let trace: f64 = (0..m).map(|i| b[(i, i)]).sum();
        let mut total = 0.0;
        for i in 0..m {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..m {
                let pair = b[(i, i)] + b[(j, j)] - 2.0 * b[(i, j)];
                worst = worst.max((pair - d[(i, j)].powi(2)).abs());
                row += d[(i, j)].powi(2);
                col += d[(j, i)].powi(2);
            }
            total += row;
            worst = worst.max((row - (trace + m as f64 * b[(i, i)])).abs());
            worst = worst.max((col - (trace + m as f64 * b[(i, i)])).abs());
        }
        worst = worst.max((total - 2.0 * m as f64 * trace).abs());
    }
    ensure(worst <= CENTERING_TOL, || format!("max identity violation {worst:e}"))?;
    Ok(format!("100 matrices, max violation {worst:.2e}"))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let objective = Objective::new(9.0, 77.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut params = 0;
    for net in 0..20u64 {
        let mut rng = Rng::new(0xC0FFEE + net);
        let d = 2 + rng.index(15);
        let k = 1 + rng.index(4);
        let n = 1 + rng.index(5);
        let m = 2 + rng.index(5);
        let batch = 1 + rng.index(8);
        let model = AutoencoderModel::new(d, k, &mut rng).unwrap();
        let x = DenseMatrix::from_fn(batch, d, |_, _| rng.normal(0.0, 1.0));
        let labels: Vec<ClassId> = (0..batch).map(|_| ClassId(rng.index(m) as u32)).collect();
        let manifold = EmbeddedManifold {
            o: DenseMatrix::from_fn(n + k, m, |_, _| rng.normal(0.0, 1.0)),
            class_ids: (0..m as u32).map(ClassId).collect(),
            effective_rank: n + k,
        };
        let predefined = DenseMatrix::from_fn(m, n, |_, _| rng.normal(0.0, 1.0));
        let targets = AlignmentTargets::new(&predefined, &manifold).unwrap();
        let (_, grads) = backward(&model, &x, &labels, Some(&targets), objective).map_err(|e| e.to_string())?;
        let loss = |m: &AutoencoderModel| total_loss(m, &x, &labels, Some(&targets), objective).unwrap().total;
        let mut probe = model.clone();
        for l in 0..model.layers().len() {
            let n_w = model.layers()[l].weights.as_slice().len();
            for p in 0..n_w + model.layers()[l].bias.len() {
                let set = |net: &mut AutoencoderModel, v: f64| {
                    let layer = &mut net.layers_mut()[l];
                    if p < n_w {
                        layer.weights.as_mut_slice()[p] = v;
                    } else {
                        layer.bias[p - n_w] = v;
                    }
                };
                let (orig, analytic) = if p < n_w {
                    (model.layers()[l].weights.as_slice()[p], grads.layers[l].weights.as_slice()[p])
                } else {
                    (model.layers()[l].bias[p - n_w], grads.layers[l].bias[p - n_w])
                };
                set(&mut probe, orig + GRAD_STEP);
                let plus = loss(&probe);
                set(&mut probe, orig - GRAD_STEP);
                let minus = loss(&probe);
                set(&mut probe, orig);
                let numeric = (plus - minus) / (2.0 * GRAD_STEP);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
                worst = worst.max(rel);
                params += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= GRAD_TOL, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < GRAD_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("20 nets, {params} parameters, max relative error {worst:.2e}, {elapsed:.2?}"))
}

fn residual(neighbors: &DenseMatrix, theta: &[f64], q: &[f64]) -> f64 {
    (0..q.len())
        .map(|j| {
            let fit: f64 = (0..theta.len()).map(|i| theta[i] * neighbors[(i, j)]).sum();
            (q[j] - fit).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn theta_oracle() -> Outcome {
    let mut rng = Rng::new(0xD00D);
    let ids = || (0..3).map(ClassId).collect::<Vec<_>>();
    let mut min_margin = f64::INFINITY;
    for instance in 0..20 {
        let n = 3 + rng.index(8);
        let neighbors = DenseMatrix::from_fn(3, n, |_, _| rng.normal(0.0, 1.0));
        let q: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        let combo = solve_combination(&q, &neighbors, ids()).map_err(|e| e.to_string())?;
        let mut grid_best = f64::INFINITY;
        for a in 0..41 {
            for b in 0..41 {
                for c in 0..41 {
                    let t = [-2.0 + 0.1 * a as f64, -2.0 + 0.1 * b as f64, -2.0 + 0.1 * c as f64];
                    grid_best = grid_best.min(residual(&neighbors, &t, &q));
                }
            }
        }
        ensure(combo.residual <= grid_best, || {
            format!("instance {instance}: residual {} above grid best {grid_best}", combo.residual)
        })?;
        min_margin = min_margin.min(grid_best - combo.residual);

        let member = instance % 3;
        let exact = solve_combination(neighbors.row(member), &neighbors, ids()).map_err(|e| e.to_string())?;
        for (i, t) in exact.theta.iter().enumerate() {
            let expected = if i == member { 1.0 } else { 0.0 };
            ensure((t - expected).abs() <= INDICATOR_TOL, || {
                format!("instance {instance}: theta {:?} is not an indicator", exact.theta)
            })?;
        }
        ensure(exact.residual <= INDICATOR_TOL, || format!("exact residual {}", exact.residual))?;
    }
    Ok(format!("20 instances beat the 41^3 grid (min margin {min_margin:.2e}); indicators exact"))
}

fn ablation_ordering(reports: &mut Vec<EvaluationReport>) -> Outcome {
    let start = Instant::now();
    let mut sums = [0.0; 3];
    for seed in 0..ABLATION_SEEDS {
        let (seen, unseen) = generate_synthetic(&SyntheticSpec {
            seed,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let config = PipelineConfig { seed, ..Default::default() };
        let outcomes = run_ablation(&config, &seen, &unseen).map_err(|e| e.to_string())?;
        for (s, o) in sums.iter_mut().zip(&outcomes) {
            *s += o.report.hit_at(1);
        }
        reports.extend(outcomes.into_iter().map(|o| o.report));
    }
    let [p, e, pe] = sums.map(|s| s / ABLATION_SEEDS as f64);
    let elapsed = start.elapsed();
    let summary = format!("mean Hit@1 P {p:.4}, E {e:.4}, P+E {pe:.4}, {elapsed:.1?}");
    ensure(pe >= p && pe >= e, || summary.clone())?;
    ensure(elapsed < ABLATION_TIME_LIMIT, || summary.clone())?;
    Ok(summary)
}

fn parse_hit_csv(path: &Path) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()).ok_or_else(|| format!("bad line '{l}'")))
        .collect()
}

fn hit_monotonicity(reports: &[EvaluationReport], cli_reports: &[PathBuf]) -> Outcome {
    let mut series: Vec<(Vec<f64>, usize)> = reports.iter().map(|r| (r.hit_at_k.clone(), r.class_ids.len())).collect();
    for p in cli_reports {
        // The CLI runs use the default split, which has 5 unseen classes.
        series.push((parse_hit_csv(p)?, 5));
    }
    ensure(!series.is_empty(), || "no reports".into())?;
    for (i, (hits, v)) in series.iter().enumerate() {
        ensure(hits.windows(2).all(|w| w[0] <= w[1]), || format!("report {i} not monotone: {hits:?}"))?;
        if hits.len() == *v {
            ensure(hits[v - 1] == 1.0, || format!("report {i}: hit@K = {} with K = v", hits[v - 1]))?;
        }
    }
    let full = series.iter().filter(|(h, v)| h.len() == *v).count();
    ensure(full > 0, || "no report reached K = v".into())?;
    Ok(format!("{} reports monotone; {full} with K = v reach 1.0", series.len()))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ams-sfe"))
}

fn run_cli(args: &[&str]) -> Result<std::process::Output, String> {
    bin().args(args).output().map_err(|e| e.to_string())
}

fn determinism(root: &Path, cli_reports: &mut Vec<PathBuf>) -> Outcome {
    let data = root.join("data");
    let out = run_cli(&["--seed", "3", "--out", data.to_str().unwrap(), "synth"])?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let mut dirs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.join(run);
        let out = run_cli(&["--seed", "3", "--out", dir.to_str().unwrap(), "run", "--data", data.to_str().unwrap()])?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        cli_reports.push(dir.join("hit_at_k.csv"));
        dirs.push(dir);
    }
    let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for required in ["model.amsf", "hit_at_k.csv", "confusion.csv", "training.csv", "unseen_prototypes.csv"] {
        ensure(names.iter().any(|n| n == required), || format!("{required} missing"))?;
    }
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", names.len()))
}

fn format_round_trip(root: &Path) -> Outcome {
    let mut rng = Rng::new(0xF00);
    let dir = root.join("formats");
    for case in 0..20 {
        let rows = rng.index(6);
        let cols = 1 + rng.index(6);
        let mut m = DenseMatrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0) * 10f64.powi(rng.index(40) as i32 - 20));
        if rows > 0 {
            let specials = [0.0, -0.0, f64::MIN_POSITIVE, 5e-324, f64::MAX, -f64::MAX, 0.1];
            for (i, v) in m.as_mut_slice().iter_mut().enumerate().take(specials.len()) {
                *v = specials[i];
            }
        }
        let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let bin_path = dir.join(format!("m{case}.amsm"));
        write_matrix_binary(&bin_path, &m).map_err(|e| e.to_string())?;
        let back = read_matrix(&bin_path).map_err(|e| e.to_string())?;
        ensure(back.shape() == m.shape() && bits(&back) == bits(&m), || format!("binary case {case}"))?;
        let bytes = encode_matrix_binary(&m);
        ensure(encode_matrix_binary(&decode_matrix_binary(&bytes, &bin_path).unwrap()) == bytes, || "re-encode".into())?;
        if rows > 0 {
            let csv_path = dir.join(format!("m{case}.csv"));
            write_matrix_csv(&csv_path, &m).map_err(|e| e.to_string())?;
            let back = read_matrix(&csv_path).map_err(|e| e.to_string())?;
            ensure(bits(&back) == bits(&m), || format!("csv case {case}"))?;
        }
        let model = AutoencoderModel::new(2 + rng.index(20), 1 + rng.index(6), &mut rng).unwrap();
        let ck = encode_checkpoint(&model);
        let back = decode_checkpoint(&ck, Path::new("mem")).map_err(|e| e.to_string())?;
        ensure(encode_checkpoint(&back) == ck && back == model, || format!("checkpoint case {case}"))?;
    }

    // Malformed inputs through the CLI.
    let good = root.join("data");
    let broken = |name: &str, edit: &dyn Fn(&Path)| -> Result<PathBuf, String> {
        let d = root.join(name);
        std::fs::create_dir_all(&d).map_err(|e| e.to_string())?;
        for entry in std::fs::read_dir(&good).map_err(|e| e.to_string())? {
            let entry = entry.unwrap();
            std::fs::copy(entry.path(), d.join(entry.file_name())).map_err(|e| e.to_string())?;
        }
        edit(&d);
        Ok(d)
    };
    let truncate = |p: PathBuf, keep: usize| {
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..keep.min(bytes.len())]).unwrap();
    };
    let truncated = broken("bad_truncated", &|d| truncate(d.join("seen_features.amsm"), 30))?;
    let nan = broken("bad_nan", &|d| {
        let p = d.join("unseen_features.amsm");
        let mut bytes = std::fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
    })?;
    let labels = broken("bad_labels", &|d| std::fs::write(d.join("seen_labels.txt"), "0\n1\n").unwrap())?;
    let ckpt = root.join("a").join("model.amsf");
    let bad_ckpt = root.join("bad.amsf");
    std::fs::copy(&ckpt, &bad_ckpt).map_err(|e| e.to_string())?;
    truncate(bad_ckpt.clone(), 40);
    let bad_magic = root.join("magic.amsf");
    let mut bytes = std::fs::read(&ckpt).map_err(|e| e.to_string())?;
    bytes[..4].copy_from_slice(b"NOPE");
    std::fs::write(&bad_magic, bytes).map_err(|e| e.to_string())?;

    let out = root.join("bad_out");
    let o = out.to_str().unwrap();
    let cases: Vec<(&str, Vec<String>, &[i32], &str)> = vec![
        ("truncated matrix", vec!["run".into(), "--data".into(), truncated.display().to_string()], &[2], "ingest"),
        ("NaN payload", vec!["run".into(), "--data".into(), nan.display().to_string()], &[2, 3], "ingest"),
        ("label count", vec!["run".into(), "--data".into(), labels.display().to_string()], &[2], "ingest"),
        (
            "truncated checkpoint",
            vec!["evaluate".into(), "--data".into(), good.display().to_string(), "--model".into(), bad_ckpt.display().to_string()],
            &[2],
            "checkpoint",
        ),
        (
            "checkpoint magic",
            vec!["evaluate".into(), "--data".into(), good.display().to_string(), "--model".into(), bad_magic.display().to_string()],
            &[2],
            "checkpoint",
        ),
    ];
    for (name, args, codes, stage) in &cases {
        let mut full = vec!["--out".to_string(), o.to_string(), "--seed".into(), "3".into()];
        full.extend(args.iter().cloned());
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let res = run_cli(&refs)?;
        let code = res.status.code().unwrap_or(-1);
        let stderr = String::from_utf8_lossy(&res.stderr);
        ensure(codes.contains(&code), || format!("{name}: exit {code}, stderr {stderr}"))?;
        ensure(stderr.contains(&format!("{stage} stage")), || format!("{name}: stderr lacks stage: {stderr}"))?;
    }
    ensure(!out.join("hit_at_k.csv").exists(), || "malformed run emitted a partial report".into())?;
    Ok(format!("20 matrix and checkpoint round-trips bit-exact; {} malformed cases rejected", cases.len()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let mut reports = Vec::new();
    let mut cli_reports = Vec::new();

    let results: Vec<(&str, Outcome)> = vec![
        ("mds-oracle", mds_oracle()),
        ("double-centering", double_centering()),
        ("gradient-check", gradient_check()),
        ("theta-oracle", theta_oracle()),
        ("ablation-ordering", ablation_ordering(&mut reports)),
        ("determinism", determinism(root, &mut cli_reports)),
    ];
    let mut results = results;
    results.push(("hit-monotonicity", hit_monotonicity(&reports, &cli_reports)));
    results.push(("format-round-trip", format_round_trip(root)));

    let mut failed = 0;
    println!();
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name:<18} {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name:<18} {detail}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
